#include "infodemic/dtm.hpp"

#include "infodemic/error.hpp"
#include "infodemic/io.hpp"
#include "infodemic/parallel.hpp"
#include "infodemic/rng.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

namespace infodemic::dtm {

using nlohmann::json;

std::uint64_t Document::length() const {
    std::uint64_t n = 0;
    for (const auto& e : words) n += e.count;
    return n;
}

std::size_t SlicedCorpus::doc_count() const {
    std::size_t n = 0;
    for (const auto& s : slices) n += s.size();
    return n;
}

SlicedCorpus slice_corpus(const std::vector<corpus::Tweet>& tweets, const textfeat::StopwordSet& stopwords,
                          const textfeat::Vocabulary& vocab, Timestamp epoch, corpus::SliceWidth width) {
    SlicedCorpus out;
    out.vocab_size = vocab.size();
    std::vector<std::int64_t> slice_of(tweets.size());
    std::int64_t last = -1;
    for (std::size_t i = 0; i < tweets.size(); ++i) {
        slice_of[i] = corpus::assign_time_slice(tweets[i].created_at, epoch, width);
        last = std::max(last, slice_of[i]);
    }
    out.slices.resize(static_cast<std::size_t>(last + 1));
    std::vector<Document> docs(tweets.size());
    parallel_for(tweets.size(), [&](std::size_t i) {
        docs[i].id = tweets[i].id;
        docs[i].words = textfeat::vectorize(textfeat::tokenize(tweets[i].text, stopwords), vocab).entries;
    });
    for (std::size_t i = 0; i < tweets.size(); ++i)
        out.slices[static_cast<std::size_t>(slice_of[i])].push_back(std::move(docs[i]));
    return out;
}

void DtmConfig::validate() const {
    if (n_topics < 2) throw InvalidArgument("n_topics must be at least 2");
    if (!(chain_variance > 0.0)) throw InvalidArgument("chain_variance must be positive");
    if (!(doc_topic_prior > 0.0)) throw InvalidArgument("doc_topic_prior must be positive");
    if (em_max_passes < 1) throw InvalidArgument("em_max_passes must be at least 1");
    if (!(elbo_rel_tol >= 0.0)) throw InvalidArgument("elbo_rel_tol must be non-negative");
    if (!(obs_variance > 0.0)) throw InvalidArgument("obs_variance must be positive");
    if (!(init_variance > 0.0)) throw InvalidArgument("init_variance must be positive");
    if (lda_max_passes < 1) throw InvalidArgument("lda_max_passes must be at least 1");
    if (!(lda_topic_smoothing > 0.0)) throw InvalidArgument("lda_topic_smoothing must be positive");
    if (estep_max_iterations < 1) throw InvalidArgument("estep_max_iterations must be at least 1");
}

KalmanResult kalman_smooth(const std::vector<double>& y, double chain_variance, double obs_variance,
                           double init_variance) {
    const std::size_t T = y.size();
    std::vector<double> m_pred(T), p_pred(T), m_filt(T), p_filt(T);
    KalmanResult r;
    r.mean.resize(T);
    r.variance.resize(T);
    double m = 0.0, p = init_variance;
    for (std::size_t t = 0; t < T; ++t) {
        if (t > 0) p += chain_variance;
        m_pred[t] = m;
        p_pred[t] = p;
        const double s = p + obs_variance;
        const double resid = y[t] - m;
        r.log_marginal += -0.5 * (std::log(2.0 * std::numbers::pi * s) + resid * resid / s);
        const double gain = p / s;
        m += gain * resid;
        p *= 1.0 - gain;
        m_filt[t] = m;
        p_filt[t] = p;
    }
    if (T == 0) return r;
    r.mean[T - 1] = m_filt[T - 1];
    r.variance[T - 1] = p_filt[T - 1];
    for (std::size_t t = T - 1; t-- > 0;) {
        const double j = p_filt[t] / p_pred[t + 1];
        r.mean[t] = m_filt[t] + j * (r.mean[t + 1] - m_pred[t + 1]);
        r.variance[t] = p_filt[t] + j * j * (r.variance[t + 1] - p_pred[t + 1]);
    }
    return r;
}

namespace {

using boost::math::digamma;
using boost::math::lgamma;

double log_sum_exp(const double* x, std::size_t n) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, x[i]);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(x[i] - mx);
    return mx + std::log(s);
}

struct DocFit {
    std::vector<double> gamma;
    std::vector<double> weighted_phi; // nnz x K, count * phi
    double local_elbo = 0.0;          // every doc term except the topic-word expectation
};

// Coordinate ascent on one document's (phi, gamma) starting from `gamma`.
// elog_beta is K x V for the document's slice.
void fit_document(const Document& doc, const double* elog_beta, std::size_t K, std::size_t V, double alpha,
                  int max_iter, double tol, DocFit& fit) {
    const std::size_t nnz = doc.words.size();
    fit.weighted_phi.assign(nnz * K, 0.0);
    std::vector<double> phi(nnz * K), elog_theta(K), next(K), logit(K);
    auto& gamma = fit.gamma;

    for (int iter = 0; iter < max_iter; ++iter) {
        const double dsum = digamma(std::accumulate(gamma.begin(), gamma.end(), 0.0));
        for (std::size_t k = 0; k < K; ++k) elog_theta[k] = digamma(gamma[k]) - dsum;
        std::fill(next.begin(), next.end(), alpha);
        for (std::size_t j = 0; j < nnz; ++j) {
            const std::size_t w = doc.words[j].index;
            for (std::size_t k = 0; k < K; ++k) logit[k] = elog_theta[k] + elog_beta[k * V + w];
            const double norm = log_sum_exp(logit.data(), K);
            for (std::size_t k = 0; k < K; ++k) {
                phi[j * K + k] = std::exp(logit[k] - norm);
                next[k] += doc.words[j].count * phi[j * K + k];
            }
        }
        double change = 0.0;
        for (std::size_t k = 0; k < K; ++k) change += std::abs(next[k] - gamma[k]);
        gamma = next;
        if (change / static_cast<double>(K) < tol) break;
    }

    const double gsum = std::accumulate(gamma.begin(), gamma.end(), 0.0);
    const double dsum = digamma(gsum);
    double local = lgamma(static_cast<double>(K) * alpha) - static_cast<double>(K) * lgamma(alpha) - lgamma(gsum);
    for (std::size_t k = 0; k < K; ++k) {
        elog_theta[k] = digamma(gamma[k]) - dsum;
        local += (alpha - 1.0) * elog_theta[k] + lgamma(gamma[k]) - (gamma[k] - 1.0) * elog_theta[k];
    }
    for (std::size_t j = 0; j < nnz; ++j) {
        const double c = doc.words[j].count;
        for (std::size_t k = 0; k < K; ++k) {
            const double f = phi[j * K + k];
            fit.weighted_phi[j * K + k] = c * f;
            if (f > 0.0) local += c * f * (elog_theta[k] - std::log(f));
        }
    }
    fit.local_elbo = local;
}

std::vector<double> initial_gamma(const Document& doc, std::size_t K, double alpha) {
    return std::vector<double>(K, alpha + static_cast<double>(doc.length()) / static_cast<double>(K));
}

void check_words(const Document& doc, std::size_t V) {
    for (const auto& e : doc.words)
        if (e.index >= V) throw InvalidArgument("document " + doc.id + " has a word index outside the vocabulary");
}

bool doc_less(const Document& a, const Document& b) {
    if (a.words.size() != b.words.size()) return a.words.size() < b.words.size();
    for (std::size_t i = 0; i < a.words.size(); ++i) {
        if (a.words[i].index != b.words[i].index) return a.words[i].index < b.words[i].index;
        if (a.words[i].count != b.words[i].count) return a.words[i].count < b.words[i].count;
    }
    return a.id < b.id;
}

// Tridiagonal precision of the random-walk prior over T slices.
struct ChainPrior {
    std::size_t T;
    double inv_init, inv_chain;

    double diag(std::size_t t) const {
        double d = t == 0 ? inv_init : 0.0;
        if (T > 1) d += (t == 0 || t == T - 1) ? inv_chain : 2.0 * inv_chain;
        return d;
    }
    double off() const { return -inv_chain; }

    // y = Lambda x for a strided T-vector
    void apply(const double* x, std::size_t stride, double* y) const {
        for (std::size_t t = 0; t < T; ++t) {
            double v = diag(t) * x[t * stride];
            if (t > 0) v += off() * x[(t - 1) * stride];
            if (t + 1 < T) v += off() * x[(t + 1) * stride];
            y[t] = v;
        }
    }
    double quad(const double* x, std::size_t stride) const {
        double q = x[0] * x[0] * inv_init;
        for (std::size_t t = 1; t < T; ++t) {
            const double d = x[t * stride] - x[(t - 1) * stride];
            q += d * d * inv_chain;
        }
        return q;
    }
};

// Maximizes, over x (T x V), the concave objective
//   -1/2 sum_w x_w' Lambda x_w + sum_t [ n_t . x_t - N_t logsumexp(x_t) ]
// by preconditioned ascent with backtracking. The preconditioner is
// Lambda + diag(N_t p_tw), solved per word as a tridiagonal system.
class TopicChainSolver {
public:
    TopicChainSolver(ChainPrior prior, std::size_t V, const std::vector<double>& counts)
        : prior_(prior), V_(V), n_(counts), totals_(prior.T, 0.0) {
        for (std::size_t t = 0; t < prior_.T; ++t)
            for (std::size_t w = 0; w < V_; ++w) totals_[t] += n_[t * V_ + w];
    }

    double objective(const std::vector<double>& x) const {
        double g = 0.0;
        for (std::size_t w = 0; w < V_; ++w) g -= 0.5 * prior_.quad(&x[w], V_);
        for (std::size_t t = 0; t < prior_.T; ++t) {
            const double* row = &x[t * V_];
            double dot = 0.0;
            for (std::size_t w = 0; w < V_; ++w) dot += n_[t * V_ + w] * row[w];
            g += dot - totals_[t] * log_sum_exp(row, V_);
        }
        return g;
    }

    void maximize(std::vector<double>& x, int max_iter = 300) const {
        const std::size_t T = prior_.T;
        center(x);
        double current = objective(x);
        std::vector<double> probs(T * V_), grad(T * V_), dir(T * V_), trial(T * V_), lam(T);
        std::vector<double> c(T), d(T);
        for (int iter = 0; iter < max_iter; ++iter) {
            for (std::size_t t = 0; t < T; ++t) {
                const double* row = &x[t * V_];
                const double lse = log_sum_exp(row, V_);
                for (std::size_t w = 0; w < V_; ++w) probs[t * V_ + w] = std::exp(row[w] - lse);
            }
            for (std::size_t w = 0; w < V_; ++w) {
                prior_.apply(&x[w], V_, lam.data());
                for (std::size_t t = 0; t < T; ++t)
                    grad[t * V_ + w] = -lam[t] + n_[t * V_ + w] - totals_[t] * probs[t * V_ + w];
                // Thomas algorithm on (Lambda + diag(N_t p_tw)) dir_w = grad_w
                for (std::size_t t = 0; t < T; ++t) {
                    const double b = prior_.diag(t) + totals_[t] * probs[t * V_ + w];
                    const double a = t > 0 ? prior_.off() : 0.0;
                    const double denom = b - a * (t > 0 ? c[t - 1] : 0.0);
                    c[t] = (t + 1 < T) ? prior_.off() / denom : 0.0;
                    d[t] = (grad[t * V_ + w] - a * (t > 0 ? d[t - 1] : 0.0)) / denom;
                }
                for (std::size_t t = T; t-- > 0;) {
                    dir[t * V_ + w] = d[t] - (t + 1 < T ? c[t] * dir[(t + 1) * V_ + w] : 0.0);
                }
            }
            double slope = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) slope += grad[i] * dir[i];
            if (!(slope > 1e-12 * std::max(1.0, std::abs(current)))) break;

            double step = 1.0;
            bool accepted = false;
            for (int halving = 0; halving < 40; ++halving, step *= 0.5) {
                for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] + step * dir[i];
                center(trial);
                const double value = objective(trial);
                if (std::isfinite(value) && value >= current + 1e-4 * step * slope) {
                    accepted = true;
                    const double gain = value - current;
                    x.swap(trial);
                    current = value;
                    if (gain <= 1e-11 * std::max(1.0, std::abs(current))) iter = max_iter;
                    break;
                }
            }
            if (!accepted) break;
        }
    }

private:
    // Shifting every word of a slice by the same amount leaves the softmax
    // alone; the prior term is smallest when each slice has mean zero.
    void center(std::vector<double>& x) const {
        for (std::size_t t = 0; t < prior_.T; ++t) {
            double* row = &x[t * V_];
            const double mean = std::accumulate(row, row + V_, 0.0) / static_cast<double>(V_);
            for (std::size_t w = 0; w < V_; ++w) row[w] -= mean;
        }
    }

    ChainPrior prior_;
    std::size_t V_;
    const std::vector<double>& n_;
    std::vector<double> totals_;
};

// E_q[log p(b)] - E_q[log q(b)] for one word's chain, via the Kalman marginal.
double chain_neg_kl(const std::vector<double>& mean, const std::vector<double>& pseudo, const DtmConfig& cfg) {
    const KalmanResult kr = kalman_smooth(pseudo, cfg.chain_variance, cfg.obs_variance, cfg.init_variance);
    double v = kr.log_marginal;
    const double nu = cfg.obs_variance;
    for (std::size_t t = 0; t < mean.size(); ++t) {
        const double r = pseudo[t] - mean[t];
        v += 0.5 * std::log(2.0 * std::numbers::pi * nu) + (r * r + kr.variance[t]) / (2.0 * nu);
    }
    return v;
}

} // namespace

LdaModel fit_lda(const std::vector<Document>& docs, std::size_t V, const DtmConfig& config) {
    config.validate();
    if (docs.empty()) throw InvalidArgument("LDA needs at least one document");
    if (V == 0) throw InvalidArgument("LDA needs a non-empty vocabulary");
    for (const auto& d : docs) check_words(d, V);
    const auto K = static_cast<std::size_t>(config.n_topics);
    const double alpha = config.doc_topic_prior;
    const double eta = config.lda_topic_smoothing;

    LdaModel model;
    model.n_topics = K;
    model.vocab_size = V;
    model.log_beta.assign(K * V, 0.0);

    // Seeded start: each topic leans towards a few random documents.
    Rng rng(derive_seed(config.seed, 0x1da));
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<double> row(V);
        for (std::size_t w = 0; w < V; ++w) row[w] = eta + 0.1 * rand_unit(rng);
        for (int s = 0; s < 3; ++s) {
            const auto& d = docs[static_cast<std::size_t>(rand_below(rng, docs.size()))];
            for (const auto& e : d.words) row[e.index] += e.count;
        }
        const double total = std::accumulate(row.begin(), row.end(), 0.0);
        for (std::size_t w = 0; w < V; ++w) model.log_beta[k * V + w] = std::log(row[w] / total);
    }

    std::vector<DocFit> fits(docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d) fits[d].gamma = initial_gamma(docs[d], K, alpha);

    std::vector<double> counts(K * V);
    for (int pass = 0; pass < config.lda_max_passes; ++pass) {
        parallel_for(docs.size(), [&](std::size_t d) {
            fit_document(docs[d], model.log_beta.data(), K, V, alpha, config.estep_max_iterations,
                         config.estep_tolerance, fits[d]);
        });
        std::fill(counts.begin(), counts.end(), 0.0);
        double local = 0.0;
        for (std::size_t d = 0; d < docs.size(); ++d) {
            local += fits[d].local_elbo;
            for (std::size_t j = 0; j < docs[d].words.size(); ++j)
                for (std::size_t k = 0; k < K; ++k)
                    counts[k * V + docs[d].words[j].index] += fits[d].weighted_phi[j * K + k];
        }
        double objective = local;
        for (std::size_t k = 0; k < K; ++k) {
            const double total = std::accumulate(counts.begin() + static_cast<std::ptrdiff_t>(k * V),
                                                 counts.begin() + static_cast<std::ptrdiff_t>((k + 1) * V), 0.0);
            for (std::size_t w = 0; w < V; ++w) {
                const double lb = std::log((counts[k * V + w] + eta) / (total + static_cast<double>(V) * eta));
                model.log_beta[k * V + w] = lb;
                objective += (counts[k * V + w] + eta) * lb;
            }
        }
        if (!std::isfinite(objective)) throw Error(fmt::format("LDA objective became non-finite at pass {}", pass + 1));
        model.elbo_trace.push_back(objective);
        if (pass > 0) {
            const double prev = model.elbo_trace[model.elbo_trace.size() - 2];
            if (std::abs(objective - prev) / std::max(1.0, std::abs(prev)) < 1e-6) break;
        }
    }
    model.gamma.reserve(docs.size());
    for (auto& f : fits) model.gamma.push_back(std::move(f.gamma));
    return model;
}

double DtmModel::beta_variance(std::size_t t, std::size_t k, std::size_t w) const {
    if (t >= t_ || k >= k_ || w >= v_) throw OutOfRange("beta index out of range");
    return slice_variance_[t];
}

std::vector<double> DtmModel::word_probs(std::size_t t, std::size_t k) const {
    if (t >= t_ || k >= k_) throw OutOfRange(fmt::format("no topic {} at slice {}", k, t));
    const double* row = &beta_mean_[index(t, k, 0)];
    const double lse = log_sum_exp(row, v_);
    std::vector<double> p(v_);
    for (std::size_t w = 0; w < v_; ++w) p[w] = std::exp(row[w] - lse);
    return p;
}

std::vector<DtmModel::RankedWord> DtmModel::top_words(std::size_t k, std::size_t t, std::size_t n) const {
    if (n > v_) throw OutOfRange(fmt::format("requested {} words from a vocabulary of {}", n, v_));
    const auto p = word_probs(t, k);
    std::vector<std::uint32_t> order(v_);
    std::iota(order.begin(), order.end(), 0u);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                      [&](std::uint32_t a, std::uint32_t b) { return p[a] != p[b] ? p[a] > p[b] : a < b; });
    std::vector<RankedWord> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({order[i], p[order[i]]});
    return out;
}

std::vector<double> DtmModel::word_trajectory(std::size_t k, std::size_t w) const {
    if (k >= k_) throw OutOfRange(fmt::format("no topic {}", k));
    if (w >= v_) throw OutOfRange(fmt::format("no word {}", w));
    std::vector<double> out;
    for (std::size_t t = 0; t < t_; ++t) out.push_back(word_probs(t, k)[w]);
    return out;
}

DtmModel fit_dtm(const SlicedCorpus& corpus, const DtmConfig& config) {
    config.validate();
    const std::size_t T = corpus.slice_count();
    const std::size_t V = corpus.vocab_size;
    const auto K = static_cast<std::size_t>(config.n_topics);
    if (T == 0) throw InvalidArgument("DTM needs at least one time slice");
    if (V == 0) throw InvalidArgument("DTM needs a non-empty vocabulary");
    for (std::size_t t = 0; t < T; ++t) {
        if (corpus.slices[t].empty()) throw InvalidArgument(fmt::format("time slice {} has no documents", t));
        for (const auto& d : corpus.slices[t]) check_words(d, V);
    }

    // canonical document order inside each slice
    struct Ref {
        std::size_t slice, original;
    };
    std::vector<Ref> refs;
    std::vector<Document> pooled;
    for (std::size_t t = 0; t < T; ++t) {
        const auto& docs = corpus.slices[t];
        std::vector<std::size_t> order(docs.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return doc_less(docs[a], docs[b]); });
        for (const std::size_t i : order) {
            refs.push_back({t, i});
            pooled.push_back(docs[i]);
        }
    }

    const LdaModel lda = fit_lda(pooled, V, config);

    DtmModel model;
    model.config_ = config;
    model.k_ = K;
    model.t_ = T;
    model.v_ = V;
    model.beta_mean_.resize(T * K * V);
    for (std::size_t k = 0; k < K; ++k) {
        const double mean =
            std::accumulate(lda.log_beta.begin() + static_cast<std::ptrdiff_t>(k * V),
                            lda.log_beta.begin() + static_cast<std::ptrdiff_t>((k + 1) * V), 0.0) /
            static_cast<double>(V);
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t w = 0; w < V; ++w) model.beta_mean_[model.index(t, k, w)] = lda.log_prob(k, w) - mean;
    }
    model.slice_variance_ =
        kalman_smooth(std::vector<double>(T, 0.0), config.chain_variance, config.obs_variance, config.init_variance)
            .variance;

    const ChainPrior prior{T, 1.0 / config.init_variance, 1.0 / config.chain_variance};
    const double alpha = config.doc_topic_prior;

    std::vector<DocFit> fits(pooled.size());
    for (std::size_t d = 0; d < pooled.size(); ++d) fits[d].gamma = lda.gamma[d];

    std::vector<double> elog_beta(T * K * V);
    std::vector<double> counts(T * K * V);
    const auto refresh_elog_beta = [&] {
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t k = 0; k < K; ++k) {
                const double* row = &model.beta_mean_[model.index(t, k, 0)];
                const double shift = log_sum_exp(row, V) + 0.5 * model.slice_variance_[t];
                for (std::size_t w = 0; w < V; ++w) elog_beta[model.index(t, k, w)] = row[w] - shift;
            }
    };

    for (int pass = 0; pass < config.em_max_passes; ++pass) {
        refresh_elog_beta();
        parallel_for(pooled.size(), [&](std::size_t d) {
            fit_document(pooled[d], &elog_beta[refs[d].slice * K * V], K, V, alpha, config.estep_max_iterations,
                         config.estep_tolerance, fits[d]);
        });
        // fixed-order reduction keeps the result independent of thread count
        std::fill(counts.begin(), counts.end(), 0.0);
        double elbo = 0.0;
        for (std::size_t d = 0; d < pooled.size(); ++d) {
            elbo += fits[d].local_elbo;
            const std::size_t base = refs[d].slice * K * V;
            for (std::size_t j = 0; j < pooled[d].words.size(); ++j)
                for (std::size_t k = 0; k < K; ++k)
                    counts[base + k * V + pooled[d].words[j].index] += fits[d].weighted_phi[j * K + k];
        }

        std::vector<double> topic_terms(K, 0.0);
        parallel_for(K, [&](std::size_t k) {
            std::vector<double> x(T * V), n(T * V);
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t w = 0; w < V; ++w) {
                    x[t * V + w] = model.beta_mean_[model.index(t, k, w)];
                    n[t * V + w] = counts[model.index(t, k, w)];
                }
            TopicChainSolver solver(prior, V, n);
            solver.maximize(x);
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t w = 0; w < V; ++w) model.beta_mean_[model.index(t, k, w)] = x[t * V + w];

            double term = 0.0;
            std::vector<double> mean(T), pseudo(T), lam(T);
            for (std::size_t w = 0; w < V; ++w) {
                for (std::size_t t = 0; t < T; ++t) mean[t] = x[t * V + w];
                prior.apply(mean.data(), 1, lam.data());
                for (std::size_t t = 0; t < T; ++t) pseudo[t] = mean[t] + config.obs_variance * lam[t];
                term += chain_neg_kl(mean, pseudo, config);
            }
            for (std::size_t t = 0; t < T; ++t) {
                const double* row = &x[t * V];
                const double shift = log_sum_exp(row, V) + 0.5 * model.slice_variance_[t];
                for (std::size_t w = 0; w < V; ++w) term += n[t * V + w] * (row[w] - shift);
            }
            topic_terms[k] = term;
        });
        for (const double v : topic_terms) elbo += v;

        if (!std::isfinite(elbo))
            throw Error(fmt::format("DTM ELBO became non-finite at pass {} (K={}, T={}, V={}, chain_variance={})",
                                    pass + 1, K, T, V, config.chain_variance));
        model.elbo_trace_.push_back(elbo);
        if (pass > 0) {
            const double prev = model.elbo_trace_[model.elbo_trace_.size() - 2];
            if (std::abs(elbo - prev) / std::max(1e-300, std::abs(prev)) < config.elbo_rel_tol) break;
        }
    }

    model.pseudo_obs_.resize(T * K * V);
    std::vector<double> mean(T), lam(T);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t w = 0; w < V; ++w) {
            for (std::size_t t = 0; t < T; ++t) mean[t] = model.beta_mean_[model.index(t, k, w)];
            prior.apply(mean.data(), 1, lam.data());
            for (std::size_t t = 0; t < T; ++t)
                model.pseudo_obs_[model.index(t, k, w)] = mean[t] + config.obs_variance * lam[t];
        }

    model.doc_topic_.resize(T);
    model.doc_ids_.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        model.doc_topic_[t].resize(corpus.slices[t].size());
        model.doc_ids_[t].resize(corpus.slices[t].size());
    }
    for (std::size_t d = 0; d < pooled.size(); ++d) {
        const auto& g = fits[d].gamma;
        const double total = std::accumulate(g.begin(), g.end(), 0.0);
        std::vector<double> theta(K);
        for (std::size_t k = 0; k < K; ++k) theta[k] = g[k] / total;
        model.doc_topic_[refs[d].slice][refs[d].original] = std::move(theta);
        model.doc_ids_[refs[d].slice][refs[d].original] = pooled[d].id;
    }
    return model;
}

std::vector<double> infer_doc_topics(const DtmModel& model, std::size_t t, const Document& doc) {
    if (t >= model.slice_count()) throw OutOfRange(fmt::format("no slice {}", t));
    check_words(doc, model.vocab_size());
    const std::size_t K = model.n_topics(), V = model.vocab_size();
    std::vector<double> elog_beta(K * V);
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<double> row(V);
        for (std::size_t w = 0; w < V; ++w) row[w] = model.beta_mean(t, k, w);
        const double shift = log_sum_exp(row.data(), V) + 0.5 * model.slice_variance()[t];
        for (std::size_t w = 0; w < V; ++w) elog_beta[k * V + w] = row[w] - shift;
    }
    DocFit fit;
    fit.gamma = initial_gamma(doc, K, model.config().doc_topic_prior);
    fit_document(doc, elog_beta.data(), K, V, model.config().doc_topic_prior, model.config().estep_max_iterations,
                 model.config().estep_tolerance, fit);
    const double total = std::accumulate(fit.gamma.begin(), fit.gamma.end(), 0.0);
    for (auto& g : fit.gamma) g /= total;
    return fit.gamma;
}

namespace {

double doc_log_likelihood(const Document& doc, const std::vector<double>& theta,
                          const std::vector<std::vector<double>>& topics) {
    double ll = 0.0;
    for (const auto& e : doc.words) {
        double p = 0.0;
        for (std::size_t k = 0; k < theta.size(); ++k) p += theta[k] * topics[k][e.index];
        ll += e.count * std::log(p);
    }
    return ll;
}

} // namespace

double per_word_log_likelihood(const DtmModel& model, const SlicedCorpus& corpus) {
    if (corpus.slice_count() != model.slice_count()) throw InvalidArgument("corpus and model slice counts differ");
    double ll = 0.0;
    std::uint64_t tokens = 0;
    for (std::size_t t = 0; t < model.slice_count(); ++t) {
        if (corpus.slices[t].size() != model.doc_topic()[t].size())
            throw InvalidArgument(fmt::format("slice {} document count differs from the model", t));
        std::vector<std::vector<double>> topics;
        for (std::size_t k = 0; k < model.n_topics(); ++k) topics.push_back(model.word_probs(t, k));
        for (std::size_t d = 0; d < corpus.slices[t].size(); ++d) {
            ll += doc_log_likelihood(corpus.slices[t][d], model.doc_topic()[t][d], topics);
            tokens += corpus.slices[t][d].length();
        }
    }
    if (tokens == 0) throw InvalidArgument("corpus has no tokens");
    return ll / static_cast<double>(tokens);
}

double per_word_log_likelihood(const LdaModel& model, const std::vector<Document>& docs) {
    if (docs.size() != model.gamma.size()) throw InvalidArgument("document count differs from the model");
    std::vector<std::vector<double>> topics(model.n_topics, std::vector<double>(model.vocab_size));
    for (std::size_t k = 0; k < model.n_topics; ++k)
        for (std::size_t w = 0; w < model.vocab_size; ++w) topics[k][w] = std::exp(model.log_prob(k, w));
    double ll = 0.0;
    std::uint64_t tokens = 0;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        std::vector<double> theta = model.gamma[d];
        const double total = std::accumulate(theta.begin(), theta.end(), 0.0);
        for (auto& v : theta) v /= total;
        ll += doc_log_likelihood(docs[d], theta, topics);
        tokens += docs[d].length();
    }
    if (tokens == 0) throw InvalidArgument("corpus has no tokens");
    return ll / static_cast<double>(tokens);
}

SliceTopicMass slice_topic_mass(const DtmModel& model, const SlicedCorpus& corpus) {
    const std::size_t T = model.slice_count(), K = model.n_topics();
    if (corpus.slice_count() != T) throw InvalidArgument("corpus and model slice counts differ");
    SliceTopicMass m;
    m.doc_mass.assign(T, std::vector<double>(K, 0.0));
    m.token_mass.assign(T, std::vector<double>(K, 0.0));
    for (std::size_t t = 0; t < T; ++t) {
        if (corpus.slices[t].size() != model.doc_topic()[t].size())
            throw InvalidArgument(fmt::format("slice {} document count differs from the model", t));
        for (std::size_t d = 0; d < corpus.slices[t].size(); ++d) {
            const auto len = static_cast<double>(corpus.slices[t][d].length());
            for (std::size_t k = 0; k < K; ++k) {
                m.doc_mass[t][k] += model.doc_topic()[t][d][k];
                m.token_mass[t][k] += len * model.doc_topic()[t][d][k];
            }
        }
    }
    const auto normalize = [](const std::vector<std::vector<double>>& rows) {
        auto out = rows;
        for (auto& r : out) {
            const double s = std::accumulate(r.begin(), r.end(), 0.0);
            for (auto& v : r) v = s > 0.0 ? v / s : 0.0;
        }
        return out;
    };
    m.doc_share = normalize(m.doc_mass);
    m.token_share = normalize(m.token_mass);
    return m;
}

double symmetric_kl(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw InvalidArgument("distributions differ in length");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double a = std::max(p[i], 1e-300), b = std::max(q[i], 1e-300);
        s += (a - b) * (std::log(a) - std::log(b));
    }
    return s;
}

std::vector<std::size_t> align_topics(const std::vector<std::vector<double>>& topics,
                                      const std::vector<std::vector<double>>& reference) {
    if (topics.size() != reference.size()) throw InvalidArgument("topic counts differ");
    const std::size_t K = topics.size();
    if (K > 9) throw InvalidArgument("exhaustive alignment supports at most 9 topics");
    std::vector<std::vector<double>> cost(K, std::vector<double>(K));
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = 0; j < K; ++j) cost[i][j] = symmetric_kl(topics[i], reference[j]);
    std::vector<std::size_t> perm(K), best;
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < K; ++i) c += cost[i][perm[i]];
        if (c < best_cost) {
            best_cost = c;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

std::string DtmModel::to_json(const textfeat::Vocabulary* vocab) const {
    nlohmann::ordered_json j;
    j["format"] = "infodemic.dtm";
    j["version"] = 1;
    j["config"] = {{"n_topics", config_.n_topics},
                   {"chain_variance", config_.chain_variance},
                   {"doc_topic_prior", config_.doc_topic_prior},
                   {"em_max_passes", config_.em_max_passes},
                   {"elbo_rel_tol", config_.elbo_rel_tol},
                   {"seed", config_.seed},
                   {"obs_variance", config_.obs_variance},
                   {"init_variance", config_.init_variance},
                   {"lda_max_passes", config_.lda_max_passes},
                   {"lda_topic_smoothing", config_.lda_topic_smoothing},
                   {"estep_max_iterations", config_.estep_max_iterations},
                   {"estep_tolerance", config_.estep_tolerance}};
    j["n_topics"] = k_;
    j["n_slices"] = t_;
    j["vocab_size"] = v_;
    if (vocab) j["vocab_hash"] = vocab->hash();
    json beta = json::array();
    for (std::size_t t = 0; t < t_; ++t) {
        json slice = json::array();
        for (std::size_t k = 0; k < k_; ++k)
            slice.push_back(std::vector<double>(beta_mean_.begin() + static_cast<std::ptrdiff_t>(index(t, k, 0)),
                                                beta_mean_.begin() + static_cast<std::ptrdiff_t>(index(t, k, 0) + v_)));
        beta.push_back(std::move(slice));
    }
    j["beta_mean"] = std::move(beta);
    j["beta_variance"] = slice_variance_;
    j["doc_ids"] = doc_ids_;
    j["doc_topic"] = doc_topic_;
    j["elbo_trace"] = elbo_trace_;
    return j.dump();
}

DtmModel DtmModel::from_json(std::string_view text) {
    try {
        const json j = json::parse(text);
        if (j.at("format") != "infodemic.dtm" || j.at("version") != 1) throw ParseError("not an infodemic.dtm v1 document");
        DtmModel m;
        const json& c = j.at("config");
        m.config_.n_topics = c.at("n_topics").get<int>();
        m.config_.chain_variance = c.at("chain_variance").get<double>();
        m.config_.doc_topic_prior = c.at("doc_topic_prior").get<double>();
        m.config_.em_max_passes = c.at("em_max_passes").get<int>();
        m.config_.elbo_rel_tol = c.at("elbo_rel_tol").get<double>();
        m.config_.seed = c.at("seed").get<std::uint64_t>();
        m.config_.obs_variance = c.at("obs_variance").get<double>();
        m.config_.init_variance = c.at("init_variance").get<double>();
        m.config_.lda_max_passes = c.at("lda_max_passes").get<int>();
        m.config_.lda_topic_smoothing = c.at("lda_topic_smoothing").get<double>();
        m.config_.estep_max_iterations = c.at("estep_max_iterations").get<int>();
        m.config_.estep_tolerance = c.at("estep_tolerance").get<double>();
        m.config_.validate();
        m.k_ = j.at("n_topics").get<std::size_t>();
        m.t_ = j.at("n_slices").get<std::size_t>();
        m.v_ = j.at("vocab_size").get<std::size_t>();
        const json& beta = j.at("beta_mean");
        if (beta.size() != m.t_) throw ParseError("beta_mean slice count mismatch");
        m.beta_mean_.reserve(m.t_ * m.k_ * m.v_);
        for (const auto& slice : beta) {
            if (slice.size() != m.k_) throw ParseError("beta_mean topic count mismatch");
            for (const auto& row : slice) {
                if (row.size() != m.v_) throw ParseError("beta_mean row length mismatch");
                for (const auto& v : row) m.beta_mean_.push_back(v.get<double>());
            }
        }
        m.slice_variance_ = j.at("beta_variance").get<std::vector<double>>();
        if (m.slice_variance_.size() != m.t_) throw ParseError("beta_variance length mismatch");
        m.doc_ids_ = j.at("doc_ids").get<std::vector<std::vector<std::string>>>();
        m.doc_topic_ = j.at("doc_topic").get<std::vector<std::vector<std::vector<double>>>>();
        m.elbo_trace_ = j.at("elbo_trace").get<std::vector<double>>();

        const ChainPrior prior{m.t_, 1.0 / m.config_.init_variance, 1.0 / m.config_.chain_variance};
        m.pseudo_obs_.resize(m.beta_mean_.size());
        std::vector<double> mean(m.t_), lam(m.t_);
        for (std::size_t k = 0; k < m.k_; ++k)
            for (std::size_t w = 0; w < m.v_; ++w) {
                for (std::size_t t = 0; t < m.t_; ++t) mean[t] = m.beta_mean_[m.index(t, k, w)];
                prior.apply(mean.data(), 1, lam.data());
                for (std::size_t t = 0; t < m.t_; ++t)
                    m.pseudo_obs_[m.index(t, k, w)] = mean[t] + m.config_.obs_variance * lam[t];
            }
        return m;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed DTM model: ") + e.what());
    }
}

void write_topics_csv(const DtmModel& model, const textfeat::Vocabulary& vocab, std::size_t n,
                      const std::filesystem::path& path) {
    if (vocab.size() != model.vocab_size()) throw InvalidArgument("vocabulary does not match the model");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    CsvWriter csv(out);
    csv.row({"slice", "topic", "rank", "term", "probability"});
    n = std::min(n, model.vocab_size());
    for (std::size_t t = 0; t < model.slice_count(); ++t)
        for (std::size_t k = 0; k < model.n_topics(); ++k) {
            const auto top = model.top_words(k, t, n);
            for (std::size_t r = 0; r < top.size(); ++r)
                csv.row({std::to_string(t), std::to_string(k), std::to_string(r + 1), vocab.term(top[r].index),
                         format_fixed(top[r].probability, 8)});
        }
    if (!out) throw IoError("write failed for " + path.string());
}

void write_trajectory_csv(const DtmModel& model, const textfeat::Vocabulary& vocab,
                          const std::vector<std::string>& terms, const std::filesystem::path& path) {
    if (vocab.size() != model.vocab_size()) throw InvalidArgument("vocabulary does not match the model");
    std::vector<std::size_t> indices;
    for (const auto& term : terms) {
        const auto i = vocab.index_of(term);
        if (i < 0) throw InvalidArgument("term '" + term + "' is not in the vocabulary");
        indices.push_back(static_cast<std::size_t>(i));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    CsvWriter csv(out);
    csv.row({"slice", "topic", "term", "probability"});
    for (std::size_t k = 0; k < model.n_topics(); ++k)
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const auto traj = model.word_trajectory(k, indices[i]);
            for (std::size_t t = 0; t < traj.size(); ++t)
                csv.row({std::to_string(t), std::to_string(k), terms[i], format_fixed(traj[t], 8)});
        }
    if (!out) throw IoError("write failed for " + path.string());
}

void write_slice_mass_csv(const SliceTopicMass& mass, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    CsvWriter csv(out);
    csv.row({"slice", "topic", "doc_mass", "doc_share", "token_mass", "token_share"});
    for (std::size_t t = 0; t < mass.doc_mass.size(); ++t)
        for (std::size_t k = 0; k < mass.doc_mass[t].size(); ++k)
            csv.row({std::to_string(t), std::to_string(k), format_fixed(mass.doc_mass[t][k], 6),
                     format_fixed(mass.doc_share[t][k], 6), format_fixed(mass.token_mass[t][k], 6),
                     format_fixed(mass.token_share[t][k], 6)});
    if (!out) throw IoError("write failed for " + path.string());
}

} // namespace infodemic::dtm
