#pragma once

#include "infodemic/corpus.hpp"
#include "infodemic/textfeat.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace infodemic::dtm {

/// Bag of words over vocabulary indices; entries sorted by index.
struct Document {
    std::string id;
    std::vector<textfeat::SparseEntry> words;

    std::uint64_t length() const;
};

struct SlicedCorpus {
    std::size_t vocab_size = 0;
    std::vector<std::vector<Document>> slices;

    std::size_t slice_count() const noexcept { return slices.size(); }
    std::size_t doc_count() const;
};

/// Groups tweets into time slices of `width` from `epoch` and vectorizes them
/// over the vocabulary. Slices run from 0 to the last occupied one.
SlicedCorpus slice_corpus(const std::vector<corpus::Tweet>& tweets, const textfeat::StopwordSet& stopwords,
                          const textfeat::Vocabulary& vocab, Timestamp epoch,
                          corpus::SliceWidth width = corpus::kWeek);

struct DtmConfig {
    int n_topics = 2;
    double chain_variance = 0.005;
    double doc_topic_prior = 0.01;
    int em_max_passes = 20;
    double elbo_rel_tol = 1e-4;
    std::uint64_t seed = 1;
    /// Variance of the pseudo-observations the chain is filtered against.
    double obs_variance = 0.5;
    /// Prior variance of the first slice's natural parameters.
    double init_variance = 5.0;
    int lda_max_passes = 50;
    double lda_topic_smoothing = 0.01;
    int estep_max_iterations = 100;
    double estep_tolerance = 1e-6;

    void validate() const;
};

/// Result of filtering and smoothing one word's pseudo-observations.
struct KalmanResult {
    std::vector<double> mean;     // smoothed means
    std::vector<double> variance; // smoothed variances
    double log_marginal = 0.0;    // log p(observations)
};

/// Forward filter and backward smoother for the random walk
/// b_1 ~ N(0, init_variance), b_t ~ N(b_{t-1}, chain_variance), y_t ~ N(b_t, obs_variance).
KalmanResult kalman_smooth(const std::vector<double>& observations, double chain_variance, double obs_variance,
                           double init_variance);

struct LdaModel {
    std::size_t n_topics = 0;
    std::size_t vocab_size = 0;
    std::vector<double> log_beta;          // K x V
    std::vector<std::vector<double>> gamma; // per input document
    std::vector<double> elbo_trace;

    double log_prob(std::size_t k, std::size_t w) const { return log_beta[k * vocab_size + w]; }
};

/// Variational LDA with point-estimated topics smoothed by `topic_smoothing`
/// pseudo-counts. Seeded initialization.
LdaModel fit_lda(const std::vector<Document>& docs, std::size_t vocab_size, const DtmConfig& config);

class DtmModel {
public:
    std::size_t n_topics() const noexcept { return k_; }
    std::size_t slice_count() const noexcept { return t_; }
    std::size_t vocab_size() const noexcept { return v_; }
    const DtmConfig& config() const noexcept { return config_; }

    double beta_mean(std::size_t t, std::size_t k, std::size_t w) const { return beta_mean_[index(t, k, w)]; }
    /// The posterior variance is shared by every word of a slice.
    double beta_variance(std::size_t t, std::size_t k, std::size_t w) const;
    double pseudo_observation(std::size_t t, std::size_t k, std::size_t w) const { return pseudo_obs_[index(t, k, w)]; }
    const std::vector<double>& slice_variance() const noexcept { return slice_variance_; }

    /// softmax(beta_mean[t, k, .])
    std::vector<double> word_probs(std::size_t t, std::size_t k) const;

    struct RankedWord {
        std::uint32_t index;
        double probability;
    };
    /// Highest-probability words, ties by index. Throws OutOfRange on bad
    /// (k, t) or n > V.
    std::vector<RankedWord> top_words(std::size_t k, std::size_t t, std::size_t n) const;
    std::vector<double> word_trajectory(std::size_t k, std::size_t w) const;

    /// Topic proportions per slice, in the input document order.
    const std::vector<std::vector<std::vector<double>>>& doc_topic() const noexcept { return doc_topic_; }
    const std::vector<std::vector<std::string>>& doc_ids() const noexcept { return doc_ids_; }
    const std::vector<double>& elbo_trace() const noexcept { return elbo_trace_; }

    std::string to_json(const textfeat::Vocabulary* vocab = nullptr) const;
    static DtmModel from_json(std::string_view text);

private:
    friend DtmModel fit_dtm(const SlicedCorpus& corpus, const DtmConfig& config);
    std::size_t index(std::size_t t, std::size_t k, std::size_t w) const { return (t * k_ + k) * v_ + w; }

    DtmConfig config_;
    std::size_t k_ = 0, t_ = 0, v_ = 0;
    std::vector<double> beta_mean_;
    std::vector<double> pseudo_obs_;
    std::vector<double> slice_variance_;
    std::vector<std::vector<std::vector<double>>> doc_topic_;
    std::vector<std::vector<std::string>> doc_ids_;
    std::vector<double> elbo_trace_;
};

/// Variational EM. Documents are put in a canonical order inside each slice,
/// so the fit does not depend on their input order. Throws InvalidArgument
/// naming an empty slice, and Error if the ELBO turns non-finite.
DtmModel fit_dtm(const SlicedCorpus& corpus, const DtmConfig& config);

/// Topic proportions for a new document against slice t's topics.
std::vector<double> infer_doc_topics(const DtmModel& model, std::size_t t, const Document& doc);

/// Mean log p(w | d) over all tokens, using each document's expected
/// proportions and the slice topics.
double per_word_log_likelihood(const DtmModel& model, const SlicedCorpus& corpus);
double per_word_log_likelihood(const LdaModel& model, const std::vector<Document>& docs);

struct SliceTopicMass {
    std::vector<std::vector<double>> doc_mass;     // T x K, sum of theta
    std::vector<std::vector<double>> doc_share;    // rows normalized
    std::vector<std::vector<double>> token_mass;   // T x K, sum of length * theta
    std::vector<std::vector<double>> token_share;
};

SliceTopicMass slice_topic_mass(const DtmModel& model, const SlicedCorpus& corpus);

/// Symmetric KL divergence between two distributions (floored at 1e-300).
double symmetric_kl(const std::vector<double>& p, const std::vector<double>& q);
/// perm[i] is the reference topic matched to topic i, minimizing total
/// symmetric KL. Exhaustive over permutations; K is at most a handful.
std::vector<std::size_t> align_topics(const std::vector<std::vector<double>>& topics,
                                      const std::vector<std::vector<double>>& reference);

/// slice,topic,rank,term,probability
void write_topics_csv(const DtmModel& model, const textfeat::Vocabulary& vocab, std::size_t n,
                      const std::filesystem::path& path);
/// slice,topic,term,probability for each listed term in every topic
void write_trajectory_csv(const DtmModel& model, const textfeat::Vocabulary& vocab,
                          const std::vector<std::string>& terms, const std::filesystem::path& path);
/// slice,topic,doc_mass,doc_share,token_mass,token_share
void write_slice_mass_csv(const SliceTopicMass& mass, const std::filesystem::path& path);

} // namespace infodemic::dtm
