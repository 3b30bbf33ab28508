#include "infodemic/active.hpp"

#include "infodemic/error.hpp"
#include "infodemic/io.hpp"
#include "infodemic/parallel.hpp"
#include "infodemic/rng.hpp"

#include <nlohmann/json.hpp>
#include <unicode/utf8.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

namespace infodemic::active {

using nlohmann::json;

std::string_view to_string(Label label) {
    switch (label) {
    case Label::Misinfo: return "misinfo";
    case Label::NotMisinfo: return "not_misinfo";
    case Label::Uncertain: return "uncertain";
    }
    return "uncertain";
}

Label parse_label(std::string_view text) {
    const std::string t = ascii_lower(trim(text));
    if (t == "misinfo" || t == "m" || t == "1") return Label::Misinfo;
    if (t == "not_misinfo" || t == "n" || t == "0") return Label::NotMisinfo;
    if (t == "uncertain" || t == "u") return Label::Uncertain;
    throw ParseError("unknown label '" + std::string(text) + "'");
}

std::string_view to_string(SourceKind kind) {
    switch (kind) {
    case SourceKind::Human: return "human";
    case SourceKind::Propagated: return "propagated";
    case SourceKind::Resolved: return "resolved";
    }
    return "human";
}

double binary_entropy(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("probability outside [0, 1]");
    double h = 0.0;
    if (p > 0.0) h -= p * std::log2(p);
    if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
    return h;
}

std::vector<ScoredItem> select_uncertain(std::vector<ScoredItem> pool, std::size_t k) {
    if (k > pool.size())
        throw InvalidArgument("cannot select " + std::to_string(k) + " items from a pool of " +
                              std::to_string(pool.size()));
    struct Key {
        double entropy;
        double distance;
    };
    std::vector<Key> keys(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i)
        keys[i] = {binary_entropy(pool[i].proba), std::abs(pool[i].proba - 0.5)};
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto before = [&](std::size_t a, std::size_t b) {
        if (keys[a].entropy != keys[b].entropy) return keys[a].entropy > keys[b].entropy;
        if (keys[a].distance != keys[b].distance) return keys[a].distance < keys[b].distance;
        return pool[a].id < pool[b].id;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), before);
    std::vector<ScoredItem> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(std::move(pool[order[i]]));
    return out;
}

namespace {

std::u32string code_points(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    std::int32_t i = 0;
    const auto length = static_cast<std::int32_t>(s.size());
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(s.data());
    while (i < length) {
        UChar32 cp;
        U8_NEXT(bytes, i, length, cp);
        out.push_back(static_cast<char32_t>(cp < 0 ? 0xFFFD : cp));
    }
    return out;
}

// Edit distance, giving up (returning bound + 1) once every cell of a row
// exceeds the bound.
std::size_t bounded_distance(const std::u32string& a, const std::u32string& b, std::size_t bound) {
    if (a.size() < b.size()) return bounded_distance(b, a, bound);
    if (a.size() - b.size() > bound) return bound + 1;
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        std::size_t row_min = cur[0];
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
            row_min = std::min(row_min, cur[j]);
        }
        if (row_min > bound) return bound + 1;
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double similarity_from_distance(std::size_t distance, std::size_t longest) {
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(distance) / static_cast<double>(longest);
}

struct Match {
    std::size_t index;
    double similarity;
};

// Candidates whose similarity to `target` reaches the threshold, in candidate
// order.
std::vector<Match> similar_texts(std::string_view target, const std::vector<std::string_view>& candidates,
                                 double threshold) {
    const std::u32string a = code_points(target);
    std::vector<char> hit(candidates.size(), 0);
    std::vector<double> sims(candidates.size(), 0.0);
    parallel_for(candidates.size(), [&](std::size_t i) {
        const std::u32string b = code_points(candidates[i]);
        const std::size_t longest = std::max(a.size(), b.size());
        // sim >= threshold needs distance <= (1 - threshold) * longest, and the
        // distance is at least the length difference.
        const auto bound = static_cast<std::size_t>(std::ceil((1.0 - threshold) * static_cast<double>(longest))) + 1;
        const std::size_t diff = a.size() > b.size() ? a.size() - b.size() : b.size() - a.size();
        if (diff > bound) return;
        const std::size_t d = bounded_distance(a, b, bound);
        if (d > bound) return;
        const double sim = similarity_from_distance(d, longest);
        if (sim >= threshold) {
            hit[i] = 1;
            sims[i] = sim;
        }
    });
    std::vector<Match> out;
    for (std::size_t i = 0; i < candidates.size(); ++i)
        if (hit[i]) out.push_back({i, sims[i]});
    return out;
}

} // namespace

std::size_t levenshtein(std::string_view a, std::string_view b) {
    const auto ua = code_points(a), ub = code_points(b);
    return bounded_distance(ua, ub, std::max(ua.size(), ub.size()));
}

double string_similarity(std::string_view a, std::string_view b) {
    const auto ua = code_points(a), ub = code_points(b);
    const std::size_t longest = std::max(ua.size(), ub.size());
    return similarity_from_distance(bounded_distance(ua, ub, longest), longest);
}

std::vector<LabeledExample> propagate_labels(const LabeledExample& human, std::string_view labeled_text,
                                             const std::vector<PoolText>& pool, double threshold, int round) {
    if (human.source.kind != SourceKind::Human) throw InvalidArgument("only human labels propagate");
    std::vector<std::string_view> texts;
    texts.reserve(pool.size());
    for (const auto& p : pool) texts.emplace_back(p.normalized);
    std::vector<LabeledExample> out;
    for (const auto& m : similar_texts(labeled_text, texts, threshold)) {
        if (pool[m.index].id == human.tweet_id) continue;
        LabeledExample e;
        e.tweet_id = pool[m.index].id;
        e.label = human.label;
        e.source.kind = SourceKind::Propagated;
        e.source.from_id = human.tweet_id;
        e.source.similarity = m.similarity;
        e.round = round;
        out.push_back(std::move(e));
    }
    return out;
}

namespace {

template <typename T>
AgreementReport kappa_impl(const std::vector<T>& a, const std::vector<T>& b) {
    if (a.size() != b.size()) throw InvalidArgument("labelings differ in length");
    if (a.empty()) throw InvalidArgument("labelings are empty");
    std::map<T, std::pair<std::uint64_t, std::uint64_t>> marginals;
    std::uint64_t matches = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++marginals[a[i]].first;
        ++marginals[b[i]].second;
        if (a[i] == b[i]) ++matches;
    }
    const auto n = static_cast<std::uint64_t>(a.size());
    // pe = S / n^2 with S = sum_c count_a(c) count_b(c); kept integral until the end
    std::uint64_t s = 0;
    for (const auto& [label, counts] : marginals) s += counts.first * counts.second;
    AgreementReport r;
    r.n_overlap = a.size();
    r.agreement = static_cast<double>(matches) / static_cast<double>(n);
    if (s == n * n) {
        if (matches != n) throw InvalidArgument("kappa undefined: chance agreement is 1 but observed is not");
        r.kappa = 1.0;
        return r;
    }
    const long double num = static_cast<long double>(n) * matches - static_cast<long double>(s);
    const long double den = static_cast<long double>(n) * n - static_cast<long double>(s);
    r.kappa = static_cast<double>(num / den);
    return r;
}

} // namespace

AgreementReport cohen_kappa(const std::vector<std::string>& labels_a, const std::vector<std::string>& labels_b) {
    return kappa_impl(labels_a, labels_b);
}

AgreementReport cohen_kappa(const std::vector<Label>& labels_a, const std::vector<Label>& labels_b) {
    return kappa_impl(labels_a, labels_b);
}

ResolutionOutcome resolve_uncertain(const std::vector<LabeledExample>& uncertain,
                                    const std::map<std::string, std::vector<Label>>& co_rater_labels) {
    ResolutionOutcome out;
    for (const auto& e : uncertain) {
        LabeledExample r = e;
        std::optional<Label> agreed;
        bool conflict = false;
        std::size_t definite = 0;
        if (const auto it = co_rater_labels.find(e.tweet_id); it != co_rater_labels.end()) {
            for (const Label l : it->second) {
                if (!is_definite(l)) continue;
                ++definite;
                if (agreed && *agreed != l) conflict = true;
                agreed = l;
            }
        }
        if (e.label != Label::Uncertain) {
            out.log.push_back(e.tweet_id + ": already definite, unchanged");
        } else if (definite == 0) {
            out.log.push_back(e.tweet_id + ": no definite co-rater label, stays uncertain");
        } else if (conflict) {
            out.log.push_back(e.tweet_id + ": co-raters disagree, stays uncertain");
        } else {
            r.label = *agreed;
            r.source = LabelSource{SourceKind::Resolved, {}, {}, 0.0};
            out.log.push_back(e.tweet_id + ": resolved to " + std::string(to_string(*agreed)) + " by " +
                              std::to_string(definite) + " co-rater label(s)");
        }
        out.examples.push_back(std::move(r));
    }
    return out;
}

std::size_t ActiveDataset::row_of(const std::string& id) const {
    const auto it = row.find(id);
    if (it == row.end()) throw InvalidArgument("unknown tweet id " + id);
    return it->second;
}

ActiveDataset make_dataset(const std::vector<corpus::Tweet>& tweets, const textfeat::StopwordSet& stopwords,
                           std::shared_ptr<const textfeat::Vocabulary> vocab, const textfeat::DomainList& domains,
                           const textfeat::LinkageIndex& linkage) {
    ActiveDataset d;
    d.features = textfeat::build_feature_matrix(tweets, stopwords, std::move(vocab), domains, linkage);
    d.ids.reserve(tweets.size());
    d.texts.reserve(tweets.size());
    d.normalized.resize(tweets.size());
    for (std::size_t i = 0; i < tweets.size(); ++i) {
        if (!d.row.emplace(tweets[i].id, i).second) throw InvalidArgument("duplicate tweet id " + tweets[i].id);
        d.ids.push_back(tweets[i].id);
        d.texts.push_back(tweets[i].text);
    }
    parallel_for(tweets.size(), [&](std::size_t i) { d.normalized[i] = corpus::normalize_tweet(tweets[i].text); });
    return d;
}

textfeat::FeatureMatrix select_rows(const ActiveDataset& data, const std::vector<std::string>& ids) {
    textfeat::FeatureMatrix m;
    m.vocab = data.features.vocab;
    m.doc_ids.reserve(ids.size());
    m.counts.reserve(ids.size());
    m.link_flags.reserve(ids.size());
    for (const auto& id : ids) {
        const std::size_t r = data.row_of(id);
        m.doc_ids.push_back(id);
        m.counts.push_back(data.features.counts[r]);
        m.link_flags.push_back(data.features.link_flags[r]);
    }
    return m;
}

namespace {

json metrics_json(const forest::Metrics& m) {
    return json{{"tp", m.confusion.tp},   {"fp", m.confusion.fp},   {"fn", m.confusion.fn},
                {"tn", m.confusion.tn},   {"accuracy", m.accuracy}, {"precision", m.precision},
                {"recall", m.recall},     {"f1", m.f1}};
}

forest::Metrics metrics_from_json(const json& j) {
    forest::Confusion c;
    c.tp = j.at("tp").get<std::size_t>();
    c.fp = j.at("fp").get<std::size_t>();
    c.fn = j.at("fn").get<std::size_t>();
    c.tn = j.at("tn").get<std::size_t>();
    return forest::metrics_from_confusion(c);
}

} // namespace

std::string to_json_line(const AuditEvent& e) {
    nlohmann::ordered_json j;
    j["seq"] = e.seq;
    j["at"] = e.at;
    j["type"] = e.type;
    j["cycle"] = e.cycle;
    if (!e.tweet_id.empty()) {
        j["tweet_id"] = e.tweet_id;
        j["label"] = to_string(e.label);
    }
    if (!e.annotator_id.empty()) j["annotator_id"] = e.annotator_id;
    if (!e.from_id.empty()) {
        j["from_id"] = e.from_id;
        j["similarity"] = e.similarity;
    }
    if (e.metrics) j["metrics"] = metrics_json(*e.metrics);
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

AuditEvent parse_audit_line(std::string_view line) {
    try {
        const json j = json::parse(line);
        AuditEvent e;
        e.seq = j.value("seq", std::size_t{0});
        e.at = j.value("at", std::string{});
        e.type = j.at("type").get<std::string>();
        e.cycle = j.at("cycle").get<int>();
        e.tweet_id = j.value("tweet_id", std::string{});
        if (j.contains("label")) e.label = parse_label(j.at("label").get<std::string>());
        e.annotator_id = j.value("annotator_id", std::string{});
        e.from_id = j.value("from_id", std::string{});
        e.similarity = j.value("similarity", 0.0);
        if (j.contains("metrics")) e.metrics = metrics_from_json(j.at("metrics"));
        return e;
    } catch (const json::exception& ex) {
        throw ParseError(std::string("bad audit record: ") + ex.what());
    }
}

std::vector<AuditEvent> load_audit_log(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read audit log " + path.string());
    std::vector<AuditEvent> events;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            events.push_back(parse_audit_line(line));
        } catch (const ParseError& ex) {
            throw ParseError(ex.what(), line_no);
        }
    }
    return events;
}

ActiveSession::ActiveSession(std::shared_ptr<const ActiveDataset> data,
                             const std::vector<forest::LabeledId>& seed_train, std::vector<forest::LabeledId> test,
                             ActiveConfig config, std::string annotator_id)
    : data_(std::move(data)), config_(std::move(config)), test_(std::move(test)) {
    if (!data_) throw InvalidArgument("active session needs a dataset");
    config_.forest.validate();
    if (config_.k_per_cycle == 0) throw InvalidArgument("k_per_cycle must be positive");
    if (config_.n_cycles < 0) throw InvalidArgument("n_cycles must be non-negative");
    if (!(config_.sim_threshold > 0.0 && config_.sim_threshold <= 1.0))
        throw InvalidArgument("similarity threshold must lie in (0, 1]");
    if (test_.empty()) throw InvalidArgument("active session needs a test set");

    std::unordered_set<std::string> test_ids;
    for (const auto& t : test_) {
        data_->row_of(t.id);
        if (!test_ids.insert(t.id).second) throw InvalidArgument("duplicate test id " + t.id);
    }
    for (const auto& s : seed_train) {
        data_->row_of(s.id);
        if (test_ids.count(s.id)) throw InvalidArgument("seed id " + s.id + " is also in the test set");
        LabeledExample e{s.id, s.positive ? Label::Misinfo : Label::NotMisinfo,
                         LabelSource{SourceKind::Human, annotator_id, {}, 0.0}, 0};
        if (!labeled_.emplace(s.id, e).second) throw InvalidArgument("duplicate seed id " + s.id);
    }
    for (const auto& id : data_->ids)
        if (!test_ids.count(id) && !labeled_.count(id)) pool_.insert(id);

    const std::string at = config_.clock ? config_.clock() : std::string{};
    for (const auto& s : seed_train) {
        const auto& e = labeled_.at(s.id);
        audit_.push_back(AuditEvent{audit_.size(), at, "seed", 0, e.tweet_id, e.label, annotator_id, {}, 0.0, {}});
    }
    for (const auto& s : seed_train) {
        const LabeledExample human = labeled_.at(s.id);
        propagate_from(human, 0);
    }
    const forest::Metrics m = retrain();
    audit_.push_back(AuditEvent{audit_.size(), at, "cycle_complete", 0, {}, Label::Uncertain, {}, {}, 0.0, m});
}

std::size_t ActiveSession::propagate_from(const LabeledExample& human, int round) {
    if (!is_definite(human.label) || pool_.empty()) return 0;
    std::vector<std::string_view> texts;
    std::vector<const std::string*> ids;
    texts.reserve(pool_.size());
    ids.reserve(pool_.size());
    for (const auto& id : pool_) {
        ids.push_back(&id);
        texts.emplace_back(data_->normalized[data_->row_of(id)]);
    }
    const auto matches = similar_texts(data_->normalized[data_->row_of(human.tweet_id)], texts, config_.sim_threshold);
    const std::string at = config_.clock ? config_.clock() : std::string{};
    std::vector<std::string> moved;
    for (const auto& m : matches) {
        const std::string& id = *ids[m.index];
        LabeledExample e{id, human.label, LabelSource{SourceKind::Propagated, {}, human.tweet_id, m.similarity}, round};
        labeled_.emplace(id, e);
        audit_.push_back(
            AuditEvent{audit_.size(), at, "propagated", round, id, human.label, {}, human.tweet_id, m.similarity, {}});
        moved.push_back(id);
    }
    for (const auto& id : moved) pool_.erase(id);
    return moved.size();
}

std::vector<forest::LabeledId> ActiveSession::training_set() const {
    std::vector<forest::LabeledId> definite;
    for (const auto& [id, e] : labeled_)
        if (is_definite(e.label)) definite.push_back({id, e.label == Label::Misinfo});
    return forest::balance_classes(std::move(definite), config_.seed);
}

forest::Metrics ActiveSession::retrain() {
    const auto train = training_set();
    std::vector<std::string> ids;
    std::vector<bool> y;
    for (const auto& t : train) {
        ids.push_back(t.id);
        y.push_back(t.positive);
    }
    model_ = std::make_shared<const forest::ForestModel>(
        forest::train_forest(select_rows(*data_, ids), y, config_.forest));

    std::vector<std::string> test_ids;
    std::vector<bool> test_y;
    for (const auto& t : test_) {
        test_ids.push_back(t.id);
        test_y.push_back(t.positive);
    }
    const forest::Metrics m = forest::evaluate(*model_, select_rows(*data_, test_ids), test_y);
    metrics_history_.push_back(m);
    return m;
}

std::vector<ScoredItem> ActiveSession::score_pool() const {
    std::vector<ScoredItem> scored;
    scored.reserve(pool_.size());
    for (const auto& id : pool_) scored.push_back({id, 0.0});
    parallel_for(scored.size(), [&](std::size_t i) {
        scored[i].proba = model_->predict_proba(forest::row_of(data_->features, data_->row_of(scored[i].id)));
    });
    return scored;
}

std::vector<ScoredItem> ActiveSession::next_batch(std::size_t k) const {
    k = std::min(k, pool_.size());
    if (config_.strategy == QueryStrategy::Entropy) return select_uncertain(score_pool(), k);

    std::vector<std::string> ids(pool_.begin(), pool_.end());
    Rng rng(derive_seed(config_.seed, 0x7a9d0000ULL + static_cast<std::uint64_t>(cycle_)));
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(rand_below(rng, ids.size() - i));
        std::swap(ids[i], ids[j]);
    }
    std::vector<ScoredItem> out;
    for (std::size_t i = 0; i < k; ++i) {
        const double p = model_->predict_proba(forest::row_of(data_->features, data_->row_of(ids[i])));
        out.push_back({ids[i], p});
    }
    return out;
}

CycleResult ActiveSession::apply_labels(const std::vector<OracleResponse>& responses) {
    if (complete()) throw OutOfRange("active session already completed " + std::to_string(config_.n_cycles) + " cycles");
    const int round = cycle_ + 1;
    CycleResult result;

    std::vector<LabeledExample> accepted;
    for (const auto& r : responses) {
        if (!pool_.count(r.tweet_id)) {
            result.rejected.push_back(r.tweet_id);
            continue;
        }
        pool_.erase(r.tweet_id);
        LabeledExample e{r.tweet_id, r.label, LabelSource{SourceKind::Human, r.annotator_id, {}, 0.0}, round};
        labeled_.emplace(r.tweet_id, e);
        accepted.push_back(std::move(e));
    }
    result.accepted = accepted.size();
    if (accepted.empty()) {
        result.metrics = metrics_history_.back();
        return result;
    }

    const std::string at = config_.clock ? config_.clock() : std::string{};
    for (const auto& e : accepted)
        audit_.push_back(
            AuditEvent{audit_.size(), at, "human", round, e.tweet_id, e.label, e.source.annotator_id, {}, 0.0, {}});
    for (const auto& e : accepted) result.propagated_count += propagate_from(e, round);

    result.metrics = retrain();
    cycle_ = round;
    audit_.push_back(AuditEvent{audit_.size(), config_.clock ? config_.clock() : std::string{}, "cycle_complete",
                                round, {}, Label::Uncertain, {}, {}, 0.0, result.metrics});
    return result;
}

std::optional<CycleResult> ActiveSession::run_cycle(LabelOracle& oracle) {
    if (complete()) throw OutOfRange("active session already completed " + std::to_string(config_.n_cycles) + " cycles");
    std::vector<OracleResponse> responses;
    for (const auto& item : next_batch(config_.k_per_cycle)) {
        const OracleRequest req{cycle_ + 1, item.id, data_->texts[data_->row_of(item.id)], item.proba};
        auto answer = oracle.ask(req);
        if (!answer) return std::nullopt;
        if (answer->tweet_id.empty()) answer->tweet_id = item.id;
        responses.push_back(std::move(*answer));
    }
    return apply_labels(responses);
}

ActiveSession ActiveSession::replay(std::shared_ptr<const ActiveDataset> data,
                                    const std::vector<forest::LabeledId>& seed_train,
                                    std::vector<forest::LabeledId> test, ActiveConfig config,
                                    const std::vector<AuditEvent>& events) {
    std::string annotator = "seed";
    for (const auto& e : events)
        if (e.type == "seed" && !e.annotator_id.empty()) {
            annotator = e.annotator_id;
            break;
        }
    ActiveSession session(std::move(data), seed_train, std::move(test), std::move(config), annotator);
    std::vector<OracleResponse> pending;
    for (const auto& e : events) {
        if (e.cycle == 0) continue;
        if (e.type == "human") {
            pending.push_back({e.tweet_id, e.label, e.annotator_id});
        } else if (e.type == "cycle_complete") {
            if (e.cycle != session.cycle() + 1)
                throw ParseError("audit log out of order at cycle " + std::to_string(e.cycle));
            session.apply_labels(pending);
            pending.clear();
        }
    }
    if (!pending.empty()) throw ParseError("audit log ends inside an unfinished cycle");
    return session;
}

} // namespace infodemic::active
