#pragma once

#include "infodemic/forest.hpp"
#include "infodemic/textfeat.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace infodemic::active {

enum class Label { Misinfo, NotMisinfo, Uncertain };

std::string_view to_string(Label label);
/// Accepts misinfo / not_misinfo / uncertain, their one-letter keys m / n / u,
/// and 1 / 0. Throws ParseError otherwise.
Label parse_label(std::string_view text);
inline bool is_definite(Label l) { return l != Label::Uncertain; }

enum class SourceKind { Human, Propagated, Resolved };
std::string_view to_string(SourceKind kind);

struct LabelSource {
    SourceKind kind = SourceKind::Human;
    std::string annotator_id; // Human
    std::string from_id;      // Propagated
    double similarity = 0.0;  // Propagated
    bool operator==(const LabelSource&) const = default;
};

struct LabeledExample {
    std::string tweet_id;
    Label label = Label::Uncertain;
    LabelSource source;
    int round = 0; // 0 = seed set, 1.. = active cycles
    bool operator==(const LabeledExample&) const = default;
};

/// Shannon entropy in bits with 0 log 0 = 0. Throws InvalidArgument outside [0, 1].
double binary_entropy(double p);

struct ScoredItem {
    std::string id;
    double proba = 0.0;
};

/// The k items of highest entropy; ties go to the smaller |p - 0.5|, then to
/// the lexicographically smaller id. Result is in selection order. Throws
/// InvalidArgument when k exceeds the pool.
std::vector<ScoredItem> select_uncertain(std::vector<ScoredItem> pool, std::size_t k);

/// Edit distance over Unicode code points.
std::size_t levenshtein(std::string_view a, std::string_view b);
/// 1 - levenshtein / max length; two empty strings are identical.
double string_similarity(std::string_view a, std::string_view b);

inline constexpr double kDefaultSimilarityThreshold = 0.95;

struct PoolText {
    std::string id;
    std::string normalized;
};

/// Pool entries whose similarity to `labeled_text` reaches the threshold, as
/// Propagated examples carrying the human label. Uses a length prefilter that
/// cannot reject a qualifying pair.
std::vector<LabeledExample> propagate_labels(const LabeledExample& human, std::string_view labeled_text,
                                             const std::vector<PoolText>& pool,
                                             double threshold = kDefaultSimilarityThreshold, int round = 0);

struct AgreementReport {
    std::size_t n_overlap = 0;
    double agreement = 0.0;
    double kappa = 0.0;
};

/// Cohen's kappa over two aligned labelings. Throws InvalidArgument on length
/// mismatch or empty input, and when chance agreement is 1 but observed is not.
AgreementReport cohen_kappa(const std::vector<std::string>& labels_a, const std::vector<std::string>& labels_b);
AgreementReport cohen_kappa(const std::vector<Label>& labels_a, const std::vector<Label>& labels_b);

struct ResolutionOutcome {
    std::vector<LabeledExample> examples; // input order; resolved entries have SourceKind::Resolved
    std::vector<std::string> log;
};

/// An Uncertain example takes the co-raters' label when every definite
/// co-rater label agrees; otherwise it stays Uncertain.
ResolutionOutcome resolve_uncertain(const std::vector<LabeledExample>& uncertain,
                                    const std::map<std::string, std::vector<Label>>& co_rater_labels);

enum class QueryStrategy { Entropy, Random };

struct ActiveConfig {
    std::size_t k_per_cycle = 3;
    int n_cycles = 9;
    double sim_threshold = kDefaultSimilarityThreshold;
    QueryStrategy strategy = QueryStrategy::Entropy;
    forest::ForestHyperparams forest;
    /// Seeds class rebalancing and random querying.
    std::uint64_t seed = 1;
    /// Wall-clock stamp for audit events; unset leaves "at" empty.
    std::function<std::string()> clock;
};

/// Immutable per-session document store: raw and normalized text plus the
/// feature rows, all aligned.
struct ActiveDataset {
    std::vector<std::string> ids;
    std::vector<std::string> texts;
    std::vector<std::string> normalized;
    textfeat::FeatureMatrix features;
    std::unordered_map<std::string, std::size_t> row;

    std::size_t row_of(const std::string& id) const;
};

ActiveDataset make_dataset(const std::vector<corpus::Tweet>& tweets, const textfeat::StopwordSet& stopwords,
                           std::shared_ptr<const textfeat::Vocabulary> vocab, const textfeat::DomainList& domains,
                           const textfeat::LinkageIndex& linkage);

/// Builds a feature matrix from a subset of dataset rows.
textfeat::FeatureMatrix select_rows(const ActiveDataset& data, const std::vector<std::string>& ids);

struct OracleRequest {
    int cycle = 0;
    std::string tweet_id;
    std::string text;
    double proba = 0.0;
};

struct OracleResponse {
    std::string tweet_id;
    Label label = Label::Uncertain;
    std::string annotator_id;
};

class LabelOracle {
public:
    virtual ~LabelOracle() = default;
    /// nullopt aborts the cycle; the session is left unchanged.
    virtual std::optional<OracleResponse> ask(const OracleRequest& request) = 0;
};

/// One append-only audit record. type is one of seed, human, propagated,
/// cycle_complete.
struct AuditEvent {
    std::size_t seq = 0;
    std::string at;
    std::string type;
    int cycle = 0;
    std::string tweet_id;
    Label label = Label::Uncertain;
    std::string annotator_id;
    std::string from_id;
    double similarity = 0.0;
    std::optional<forest::Metrics> metrics;
};

std::string to_json_line(const AuditEvent& event);
AuditEvent parse_audit_line(std::string_view line);
std::vector<AuditEvent> load_audit_log(const std::filesystem::path& path);

struct CycleResult {
    std::size_t accepted = 0;
    std::size_t propagated_count = 0;
    std::vector<std::string> rejected;
    forest::Metrics metrics;
};

/// Pool-based active learning around the forest. labeled and pool partition
/// the non-test documents; the model is retrained after every cycle on the
/// definite labels, rebalanced by downsampling.
class ActiveSession {
public:
    /// seed_train holds human labels for round 0; test is the fixed held-out
    /// set. Every other dataset document starts in the pool, after which the
    /// seed labels are propagated.
    ActiveSession(std::shared_ptr<const ActiveDataset> data, const std::vector<forest::LabeledId>& seed_train,
                  std::vector<forest::LabeledId> test, ActiveConfig config, std::string annotator_id = "seed");

    int cycle() const noexcept { return cycle_; }
    int n_cycles() const noexcept { return config_.n_cycles; }
    bool complete() const noexcept { return cycle_ >= config_.n_cycles; }
    const ActiveConfig& config() const noexcept { return config_; }
    const ActiveDataset& data() const noexcept { return *data_; }

    const std::map<std::string, LabeledExample>& labeled() const noexcept { return labeled_; }
    const std::set<std::string>& pool() const noexcept { return pool_; }
    const std::vector<forest::LabeledId>& test() const noexcept { return test_; }
    const forest::ForestModel& model() const noexcept { return *model_; }
    std::shared_ptr<const forest::ForestModel> model_ptr() const noexcept { return model_; }
    const std::vector<forest::Metrics>& metrics_history() const noexcept { return metrics_history_; }
    const std::vector<AuditEvent>& audit() const noexcept { return audit_; }

    /// Current model probability for every pool item, in id order.
    std::vector<ScoredItem> score_pool() const;
    /// The next query batch under the configured strategy.
    std::vector<ScoredItem> next_batch(std::size_t k) const;

    /// Records human labels for pool items, propagates definite labels,
    /// retrains and advances the cycle. Unknown or non-pool ids are rejected
    /// individually. Throws OutOfRange when the session is complete.
    CycleResult apply_labels(const std::vector<OracleResponse>& responses);

    /// Queries the oracle for k items and applies the answers. Returns nullopt
    /// (session unchanged) if the oracle aborts.
    std::optional<CycleResult> run_cycle(LabelOracle& oracle);

    /// Training ids and labels currently used by the model.
    std::vector<forest::LabeledId> training_set() const;

    /// Rebuilds a session from its seed state and audit log by re-applying the
    /// human labels cycle by cycle.
    static ActiveSession replay(std::shared_ptr<const ActiveDataset> data,
                                const std::vector<forest::LabeledId>& seed_train, std::vector<forest::LabeledId> test,
                                ActiveConfig config, const std::vector<AuditEvent>& events);

private:
    std::size_t propagate_from(const LabeledExample& human, int round);
    forest::Metrics retrain();

    std::shared_ptr<const ActiveDataset> data_;
    ActiveConfig config_;
    std::vector<forest::LabeledId> test_;
    std::map<std::string, LabeledExample> labeled_;
    std::set<std::string> pool_;
    std::shared_ptr<const forest::ForestModel> model_;
    std::vector<forest::Metrics> metrics_history_;
    std::vector<AuditEvent> audit_;
    int cycle_ = 0;
};

} // namespace infodemic::active
