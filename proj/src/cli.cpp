#include "infodemic/cli.hpp"

#include "infodemic/active.hpp"
#include "infodemic/corpus.hpp"
#include "infodemic/dtm.hpp"
#include "infodemic/error.hpp"
#include "infodemic/forest.hpp"
#include "infodemic/io.hpp"
#include "infodemic/labelserver.hpp"
#include "infodemic/parallel.hpp"
#include "infodemic/report.hpp"
#include "infodemic/rng.hpp"
#include "infodemic/sentiment.hpp"
#include "infodemic/textfeat.hpp"
#include "infodemic/theoryfilter.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>

#ifndef INFODEMIC_DATA_DIR
#define INFODEMIC_DATA_DIR "data"
#endif

namespace infodemic::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

class UsageError : public Error {
public:
    using Error::Error;
};

struct Globals {
    std::string config;
    std::uint64_t seed = 1;
    std::string out = "out";
    std::size_t threads = 0;
};

ojson file_ref(const fs::path& p) {
    return ojson{{"file", p.filename().string()}, {"sha256", sha256_file(p)}};
}

ojson base_config(const std::string& command, const Globals& g) {
    return ojson{{"command", command}, {"seed", g.seed}};
}

std::vector<std::string> relative_files(const fs::path& root, const std::vector<fs::path>& files) {
    std::vector<std::string> out;
    for (const auto& f : files) out.push_back(fs::relative(f, root).generic_string());
    return out;
}

void finish(const fs::path& out_dir, const std::vector<fs::path>& files, const ojson& config, std::ostream& out) {
    const auto entries = report::write_manifest(out_dir, relative_files(out_dir, files), config);
    for (const auto& e : entries) out << "  " << e.file << (e.rows ? fmt::format(" ({} rows)", e.rows) : "") << '\n';
    out << "wrote " << (out_dir / "manifest.json").string() << '\n';
}

std::string data_path(const char* name) { return (fs::path(INFODEMIC_DATA_DIR) / name).string(); }

struct LabelRow {
    std::string id;
    active::Label label;
    std::string annotator;
};

/// tweet_id,label[,annotator_id]
std::vector<LabelRow> read_labels(const fs::path& path) {
    const CsvTable table = read_csv(path);
    const std::size_t c_id = table.column("tweet_id"), c_label = table.column("label");
    std::optional<std::size_t> c_ann;
    for (std::size_t i = 0; i < table.header.size(); ++i)
        if (table.header[i] == "annotator_id") c_ann = i;
    std::vector<LabelRow> rows;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& r = table.rows[i];
        try {
            rows.push_back({r.at(c_id), active::parse_label(trim(r.at(c_label))), c_ann ? r.at(*c_ann) : ""});
        } catch (const ParseError& e) {
            throw ParseError(path.string() + ": " + e.what(), i + 2);
        }
    }
    return rows;
}

std::pair<std::string, fs::path> parse_assignment(const std::string& text, const char* flag) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == text.size())
        throw UsageError(fmt::format("{} expects THEORY=PATH, got '{}'", flag, text));
    return {text.substr(0, eq), fs::path(text.substr(eq + 1))};
}

void validate(const auto& config) {
    try {
        config.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
}

struct ForestFlags {
    int trees = 150;
    int max_leaves = 25;
    int min_leaf = 3;
    int mtry = 25;
    bool no_replace = false;
    std::string min_size_rule = "cases";

    void add(CLI::App* app) {
        app->add_option("--trees", trees, "Trees per forest")->capture_default_str();
        app->add_option("--max-leaves", max_leaves, "Maximum terminal nodes per tree")->capture_default_str();
        app->add_option("--min-leaf", min_leaf, "Minimum leaf size")->capture_default_str();
        app->add_option("--mtry", mtry, "Candidate features per split")->capture_default_str();
        app->add_flag("--no-replace", no_replace, "Bootstrap without replacement");
        app->add_option("--min-size-rule", min_size_rule, "How --min-leaf is read: cases or leaves")
            ->check(CLI::IsMember({"cases", "leaves"}))
            ->capture_default_str();
    }

    forest::ForestHyperparams hyperparams(std::uint64_t seed) const {
        forest::ForestHyperparams hp;
        hp.n_trees = trees;
        hp.max_terminal_nodes = max_leaves;
        hp.min_leaf_size = min_leaf;
        hp.features_per_split = mtry;
        hp.bootstrap_with_replacement = !no_replace;
        hp.seed = seed;
        hp.min_size_rule = min_size_rule == "leaves" ? forest::MinSizeRule::LeavesPerTree
                                                     : forest::MinSizeRule::CasesPerLeaf;
        validate(hp);
        return hp;
    }
};

ojson hp_json(const forest::ForestHyperparams& hp) {
    return ojson{{"n_trees", hp.n_trees},
                 {"max_terminal_nodes", hp.max_terminal_nodes},
                 {"min_leaf_size", hp.min_leaf_size},
                 {"features_per_split", hp.features_per_split},
                 {"bootstrap_with_replacement", hp.bootstrap_with_replacement},
                 {"min_size_rule", hp.min_size_rule == forest::MinSizeRule::LeavesPerTree ? "leaves" : "cases"},
                 {"seed", hp.seed}};
}

textfeat::DomainList load_domains(const std::string& path) {
    return path.empty() ? textfeat::DomainList{} : textfeat::load_domain_list(path);
}

// ---------------------------------------------------------------- ingest

struct IngestFlags {
    std::string input;
    std::string lang = "en";
    std::string dedup = "id";
};

void run_ingest(const Globals& g, const IngestFlags& f, std::ostream& out) {
    const fs::path dir(g.out);
    ensure_directory(dir);
    corpus::LoadReport load;
    auto tweets = corpus::load_jsonl(f.input, f.lang.empty() ? std::nullopt : std::optional(f.lang), &load);
    std::size_t dropped = 0;
    if (f.dedup != "none")
        tweets = corpus::deduplicate(std::move(tweets),
                                     f.dedup == "text" ? corpus::DedupKey::NormalizedText : corpus::DedupKey::Id,
                                     &dropped);
    const fs::path corpus_path = dir / "corpus.jsonl", report_path = dir / "ingest_report.json";
    corpus::write_jsonl(corpus_path, tweets);
    const ojson rep{{"lines_read", load.lines_read},
                    {"parsed", load.parsed},
                    {"skipped", load.skipped},
                    {"language_rejected", load.language_rejected},
                    {"duplicates_dropped", dropped},
                    {"written", tweets.size()}};
    write_file(report_path, rep.dump(2) + "\n");
    out << fmt::format("read {} lines: {} parsed, {} skipped, {} other-language, {} duplicates; kept {}\n",
                       load.lines_read, load.parsed, load.skipped, load.language_rejected, dropped, tweets.size());
    ojson cfg = base_config("ingest", g);
    cfg["input"] = file_ref(f.input);
    cfg["lang"] = f.lang;
    cfg["dedup"] = f.dedup;
    finish(dir, {corpus_path, report_path}, cfg, out);
}

// ---------------------------------------------------------------- filter

struct FilterFlags {
    std::string corpus;
    std::string theories = data_path("theories.conf");
};

void run_filter(const Globals& g, const FilterFlags& f, std::ostream& out) {
    const fs::path dir(g.out);
    ensure_directory(dir / "datasets");
    const auto configs = theoryfilter::load_theory_config(f.theories);
    std::vector<theoryfilter::CompiledTheory> theories;
    try {
        theories = theoryfilter::compile_theories(configs);
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    const auto tweets = corpus::load_jsonl(f.corpus);
    const auto partition = theoryfilter::partition_corpus(tweets, theories);

    std::vector<fs::path> files{dir / "partition.csv", dir / "edges.csv", dir / "table2.csv"};
    theoryfilter::write_partition_csv(partition.report, files[0]);
    theoryfilter::write_edge_csv(partition.report, files[1]);
    report::write_table2_csv(report::table2(partition.report, std::nullopt), files[2]);
    for (const auto& name : partition.report.theories) {
        const fs::path p = dir / "datasets" / (name + ".jsonl");
        const auto it = partition.datasets.find(name);
        corpus::write_jsonl(p, it == partition.datasets.end() ? std::vector<corpus::Tweet>{} : it->second);
        files.push_back(p);
        out << fmt::format("{}: {} tweets ({} in several theories)\n", name, partition.report.per_theory_count.at(name),
                           partition.report.multi_theory_count.at(name));
    }
    out << fmt::format("{} of {} tweets matched a theory\n", partition.report.total_unique, tweets.size());
    ojson cfg = base_config("filter", g);
    cfg["corpus"] = file_ref(f.corpus);
    cfg["theories"] = file_ref(f.theories);
    finish(dir, files, cfg, out);
}

// ---------------------------------------------------------------- sample

struct SampleFlags {
    std::string dataset;
    std::size_t n = 1000;
};

void run_sample(const Globals& g, const SampleFlags& f, std::ostream& out) {
    const fs::path dir(g.out);
    ensure_directory(dir);
    const auto tweets = corpus::load_jsonl(f.dataset);
    std::vector<std::size_t> order(tweets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(g.seed, 0x5a3b1e));
    shuffle(std::span<std::size_t>(order), rng);
    order.resize(std::min(f.n, order.size()));
    std::vector<corpus::Tweet> drawn;
    drawn.reserve(order.size());
    for (const auto i : order) drawn.push_back(tweets[i]);
    std::size_t duplicates = 0;
    auto unique = corpus::deduplicate(std::move(drawn), corpus::DedupKey::NormalizedText, &duplicates);

    const fs::path sample_path = dir / "sample.jsonl", template_path = dir / "labels_template.csv",
                   report_path = dir / "sample_report.json";
    corpus::write_jsonl(sample_path, unique);
    {
        std::ofstream t(template_path, std::ios::binary | std::ios::trunc);
        if (!t) throw IoError("cannot write " + template_path.string());
        CsvWriter csv(t);
        csv.row({"tweet_id", "label", "annotator_id", "text"});
        for (const auto& tw : unique) csv.row({tw.id, "", "", tw.text});
    }
    const ojson rep{{"requested", f.n}, {"available", tweets.size()}, {"drawn", order.size()},
                    {"duplicates_removed", duplicates}, {"unique", unique.size()}};
    write_file(report_path, rep.dump(2) + "\n");
    out << fmt::format("drew {} of {} tweets; {} unique after removing {} duplicates\n", order.size(), tweets.size(),
                       unique.size(), duplicates);
    ojson cfg = base_config("sample", g);
    cfg["dataset"] = file_ref(f.dataset);
    cfg["n"] = f.n;
    finish(dir, {sample_path, template_path, report_path}, cfg, out);
}

// ---------------------------------------------------------------- train

struct TrainFlags {
    std::string dataset;
    std::string labels;
    std::string co_rater_labels;
    std::string theory;
    std::string domains;
    std::string stopwords = data_path("stopwords_en.txt");
    double train_fraction = 2.0 / 3.0;
    double min_df = textfeat::kDefaultMinDfFraction;
    std::string trained_at;
    ForestFlags forest;
};

std::string theory_name(const std::string& flag, const fs::path& dataset) {
    return flag.empty() ? dataset.stem().string() : flag;
}

void run_train(const Globals& g, const TrainFlags& f, std::ostream& out) {
    if (!(f.train_fraction > 0.0 && f.train_fraction < 1.0)) throw UsageError("--train-fraction must be in (0, 1)");
    const auto hp = f.forest.hyperparams(g.seed);
    const std::string theory = theory_name(f.theory, f.dataset);
    const fs::path dir(g.out);
    ensure_directory(dir);

    const auto tweets = corpus::load_jsonl(f.dataset);
    const auto stopwords = textfeat::load_stopwords(f.stopwords);
    const auto domains = load_domains(f.domains);
    auto rows = read_labels(f.labels);

    if (!f.co_rater_labels.empty()) {
        std::map<std::string, std::vector<active::Label>> co;
        for (const auto& r : read_labels(f.co_rater_labels)) co[r.id].push_back(r.label);
        std::vector<active::LabeledExample> uncertain;
        for (const auto& r : rows)
            if (r.label == active::Label::Uncertain) uncertain.push_back({r.id, r.label, {}, 0});
        const auto resolved = active::resolve_uncertain(uncertain, co);
        std::map<std::string, active::Label> now;
        for (const auto& e : resolved.examples) now[e.tweet_id] = e.label;
        for (auto& r : rows)
            if (auto it = now.find(r.id); it != now.end()) r.label = it->second;
        for (const auto& line : resolved.log) out << line << '\n';
    }

    std::map<std::string, bool> label_of;
    std::size_t uncertain = 0;
    for (const auto& r : rows) {
        if (!active::is_definite(r.label)) {
            ++uncertain;
            continue;
        }
        label_of[r.id] = r.label == active::Label::Misinfo;
    }
    std::vector<corpus::Tweet> labeled;
    std::set<std::string> found;
    for (const auto& t : tweets)
        if (label_of.count(t.id) && found.insert(t.id).second) labeled.push_back(t);
    if (found.size() != label_of.size()) {
        for (const auto& [id, _] : label_of)
            if (!found.count(id)) throw ParseError(fmt::format("labeled tweet {} is not in {}", id, f.dataset));
    }

    std::vector<std::vector<std::string>> token_docs;
    for (const auto& t : labeled) token_docs.push_back(textfeat::tokenize(t.text, stopwords));
    auto vocab = std::make_shared<const textfeat::Vocabulary>(textfeat::build_vocabulary(token_docs, f.min_df));
    const textfeat::LinkageIndex linkage(tweets);
    const auto data = active::make_dataset(labeled, stopwords, vocab, domains, linkage);

    std::vector<forest::LabeledId> examples;
    for (const auto& [id, pos] : label_of) examples.push_back({id, pos});
    const auto split = forest::stratified_split(examples, f.train_fraction, true, g.seed);
    const auto to_vectors = [&](const std::vector<forest::LabeledId>& ids) {
        std::vector<std::string> names;
        std::vector<bool> labels;
        for (const auto& e : ids) {
            names.push_back(e.id);
            labels.push_back(e.positive);
        }
        return std::pair{active::select_rows(data, names), labels};
    };
    const auto [train_m, train_y] = to_vectors(split.train);
    const auto [test_m, test_y] = to_vectors(split.test);
    const auto model = forest::train_forest(train_m, train_y, hp, f.trained_at);
    const auto metrics = forest::evaluate(model, test_m, test_y);

    const fs::path model_path = dir / "model.json", vocab_path = dir / "vocab.json", metrics_path = dir / "metrics.csv",
                   split_path = dir / "split.csv";
    model.save(model_path);
    vocab->save(vocab_path);
    report::write_metrics_csv(theory, "rf", metrics, metrics_path);
    {
        std::ofstream s(split_path, std::ios::binary | std::ios::trunc);
        if (!s) throw IoError("cannot write " + split_path.string());
        CsvWriter csv(s);
        csv.row({"tweet_id", "label", "set"});
        for (const auto& e : split.train) csv.row({e.id, e.positive ? "misinfo" : "not_misinfo", "train"});
        for (const auto& e : split.test) csv.row({e.id, e.positive ? "misinfo" : "not_misinfo", "test"});
    }
    out << fmt::format("{}: {} labeled ({} uncertain excluded), vocabulary {} terms, train {} / test {}\n", theory,
                       label_of.size(), uncertain, vocab->size(), split.train.size(), split.test.size());
    out << fmt::format("accuracy {:.3f}  recall {:.3f}  precision {:.3f}  F1 {:.3f}\n", metrics.accuracy,
                       metrics.recall, metrics.precision, metrics.f1);

    ojson cfg = base_config("train", g);
    cfg["theory"] = theory;
    cfg["dataset"] = file_ref(f.dataset);
    cfg["labels"] = file_ref(f.labels);
    if (!f.co_rater_labels.empty()) cfg["co_rater_labels"] = file_ref(f.co_rater_labels);
    if (!f.domains.empty()) cfg["domains"] = file_ref(f.domains);
    cfg["stopwords"] = file_ref(f.stopwords);
    cfg["train_fraction"] = f.train_fraction;
    cfg["min_df"] = f.min_df;
    cfg["forest"] = hp_json(hp);
    finish(dir, {model_path, vocab_path, metrics_path, split_path}, cfg, out);
}

// ---------------------------------------------------------------- active / serve

struct ActiveFlags {
    std::string dataset;
    std::string train_dir;
    std::string theory;
    std::string domains;
    std::string stopwords = data_path("stopwords_en.txt");
    std::size_t k = 3;
    int cycles = 9;
    double sim_threshold = active::kDefaultSimilarityThreshold;
    std::string strategy = "entropy";
    std::string annotator = "annotator";
    bool serve = false;
    std::string addr = "127.0.0.1:8080";
    std::string session_dir;
    std::string static_dir;
};

struct SessionInputs {
    std::shared_ptr<const active::ActiveDataset> data;
    std::vector<forest::LabeledId> seed_train;
    std::vector<forest::LabeledId> test;
    active::ActiveConfig config;
    std::string theory;
    ojson echo;
};

SessionInputs load_session_inputs(const Globals& g, const ActiveFlags& f) {
    if (f.k == 0) throw UsageError("--k must be at least 1");
    if (f.cycles < 0) throw UsageError("--cycles must be non-negative");
    if (!(f.sim_threshold > 0.0 && f.sim_threshold <= 1.0)) throw UsageError("--sim-threshold must be in (0, 1]");
    const fs::path train_dir(f.train_dir);
    const fs::path model_path = train_dir / "model.json", vocab_path = train_dir / "vocab.json",
                   split_path = train_dir / "split.csv";
    for (const auto& p : {model_path, vocab_path, split_path})
        if (!fs::exists(p)) throw UsageError("missing " + p.string() + " (run train first)");

    SessionInputs s;
    s.theory = theory_name(f.theory, f.dataset);
    const auto tweets = corpus::load_jsonl(f.dataset);
    const auto stopwords = textfeat::load_stopwords(f.stopwords);
    const auto domains = load_domains(f.domains);
    auto vocab = std::make_shared<const textfeat::Vocabulary>(textfeat::Vocabulary::load(vocab_path));
    const auto seed_model = forest::ForestModel::load(model_path);
    if (seed_model.vocab_hash() != vocab->hash()) throw ParseError(model_path.string() + " does not match vocab.json");

    const CsvTable split = read_csv(split_path);
    const std::size_t c_id = split.column("tweet_id"), c_label = split.column("label"), c_set = split.column("set");
    for (const auto& r : split.rows) {
        forest::LabeledId e{r.at(c_id), active::parse_label(r.at(c_label)) == active::Label::Misinfo};
        (r.at(c_set) == "test" ? s.test : s.seed_train).push_back(std::move(e));
    }
    s.data = std::make_shared<const active::ActiveDataset>(
        active::make_dataset(tweets, stopwords, vocab, domains, textfeat::LinkageIndex(tweets)));

    s.config.k_per_cycle = f.k;
    s.config.n_cycles = f.cycles;
    s.config.sim_threshold = f.sim_threshold;
    s.config.strategy = f.strategy == "random" ? active::QueryStrategy::Random : active::QueryStrategy::Entropy;
    s.config.forest = seed_model.hyperparams();
    s.config.seed = g.seed;

    s.echo = base_config("active", g);
    s.echo["theory"] = s.theory;
    s.echo["dataset"] = file_ref(f.dataset);
    s.echo["model"] = file_ref(model_path);
    s.echo["vocab"] = file_ref(vocab_path);
    s.echo["split"] = file_ref(split_path);
    if (!f.domains.empty()) s.echo["domains"] = file_ref(f.domains);
    s.echo["stopwords"] = file_ref(f.stopwords);
    s.echo["k"] = f.k;
    s.echo["cycles"] = f.cycles;
    s.echo["sim_threshold"] = f.sim_threshold;
    s.echo["strategy"] = f.strategy;
    s.echo["forest"] = hp_json(s.config.forest);
    return s;
}

class TerminalOracle : public active::LabelOracle {
public:
    TerminalOracle(std::istream& in, std::ostream& out, std::string annotator)
        : in_(in), out_(out), annotator_(std::move(annotator)) {}

    std::optional<active::OracleResponse> ask(const active::OracleRequest& r) override {
        out_ << fmt::format("\n[cycle {}] {}  p(misinfo)={:.3f}\n  {}\n", r.cycle, r.tweet_id, r.proba, r.text);
        for (;;) {
            out_ << "label [m]isinfo / [n]ot / [u]ncertain, q to stop: " << std::flush;
            std::string line;
            if (!std::getline(in_, line)) return std::nullopt;
            line = ascii_lower(trim(line));
            if (line == "q") return std::nullopt;
            if (line == "m" || line == "n" || line == "u")
                return active::OracleResponse{r.tweet_id, active::parse_label(line), annotator_};
        }
    }

private:
    std::istream& in_;
    std::ostream& out_;
    std::string annotator_;
};

void write_active_outputs(const fs::path& dir, const active::ActiveSession& session, const SessionInputs& inputs,
                          const fs::path& vocab_source, ojson cfg, std::ostream& out) {
    const fs::path model_path = dir / "model.json", vocab_path = dir / "vocab.json", metrics_path = dir / "metrics.csv",
                   history_path = dir / "history.csv", audit_path = dir / "audit.jsonl",
                   labels_path = dir / "labels.csv";
    session.model().save(model_path);
    write_file(vocab_path, read_file(vocab_source));
    report::write_metrics_csv(inputs.theory, "rf_active", session.metrics_history().back(), metrics_path);
    write_file(history_path, labelserver::metrics_csv(session.metrics_history()));
    std::string audit;
    for (const auto& e : session.audit()) audit += active::to_json_line(e) + "\n";
    write_file(audit_path, audit);
    {
        std::ofstream l(labels_path, std::ios::binary | std::ios::trunc);
        if (!l) throw IoError("cannot write " + labels_path.string());
        CsvWriter csv(l);
        csv.row({"tweet_id", "label", "source", "round"});
        for (const auto& [id, e] : session.labeled())
            csv.row({id, std::string(active::to_string(e.label)), std::string(active::to_string(e.source.kind)),
                     std::to_string(e.round)});
    }
    const auto& m = session.metrics_history();
    out << fmt::format("cycles completed: {} of {}; F1 {:.3f} -> {:.3f}\n", session.cycle(), session.n_cycles(),
                       m.front().f1, m.back().f1);
    cfg["cycles_completed"] = session.cycle();
    finish(dir, {model_path, vocab_path, metrics_path, history_path, audit_path, labels_path}, cfg, out);
}

std::atomic<labelserver::HttpServer*> g_server{nullptr};

extern "C" void stop_server(int) {
    if (auto* s = g_server.load()) s->stop();
}

std::pair<std::string, int> parse_addr(const std::string& addr) {
    const auto colon = addr.rfind(':');
    try {
        if (colon == std::string::npos) return {"127.0.0.1", std::stoi(addr)};
        return {addr.substr(0, colon), std::stoi(addr.substr(colon + 1))};
    } catch (const std::exception&) {
        throw UsageError("--addr expects HOST:PORT, got '" + addr + "'");
    }
}

void run_serve(const Globals& g, ActiveFlags f, std::ostream& out) {
    if (f.session_dir.empty()) f.session_dir = (fs::path(g.out) / "session").string();
    const fs::path session_dir(f.session_dir);
    const fs::path session_file = session_dir / "session.json", audit_path = session_dir / "audit.jsonl";
    if (f.dataset.empty() || f.train_dir.empty()) {
        // Restart from the stored session description.
        if (!fs::exists(session_file))
            throw UsageError("no session in " + session_dir.string() + "; pass --dataset and --train-dir");
        const auto s = nlohmann::json::parse(read_file(session_file));
        f.dataset = s.at("dataset").get<std::string>();
        f.train_dir = s.at("train_dir").get<std::string>();
        f.theory = s.value("theory", f.theory);
        f.domains = s.value("domains", std::string{});
        f.stopwords = s.value("stopwords", f.stopwords);
        f.k = s.value("k", f.k);
        f.cycles = s.value("cycles", f.cycles);
        f.sim_threshold = s.value("sim_threshold", f.sim_threshold);
        f.strategy = s.value("strategy", f.strategy);
    }
    auto inputs = load_session_inputs(g, f);
    const auto [host, port] = parse_addr(f.addr);
    inputs.config.clock = [] {
        return format_timestamp(std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()));
    };

    ensure_directory(session_dir);
    const auto abs = [](const std::string& p) { return p.empty() ? p : fs::absolute(p).string(); };
    const nlohmann::json desc{{"dataset", abs(f.dataset)}, {"train_dir", abs(f.train_dir)},
                              {"theory", inputs.theory},    {"domains", abs(f.domains)},
                              {"stopwords", abs(f.stopwords)}, {"k", f.k},
                              {"cycles", f.cycles},         {"sim_threshold", f.sim_threshold},
                              {"strategy", f.strategy},     {"seed", g.seed}};
    write_file(session_file, desc.dump(2) + "\n");

    std::optional<active::ActiveSession> session;
    labelserver::AuditFile audit_file(audit_path);
    if (fs::exists(audit_path) && fs::file_size(audit_path) > 0) {
        session.emplace(active::ActiveSession::replay(inputs.data, inputs.seed_train, inputs.test, inputs.config,
                                                      active::load_audit_log(audit_path)));
        out << fmt::format("replayed {} audit events; at cycle {}\n", session->audit().size(), session->cycle());
    } else {
        session.emplace(inputs.data, inputs.seed_train, inputs.test, inputs.config);
        for (const auto& e : session->audit()) audit_file.append(e);
    }

    labelserver::LabelService service(std::move(*session),
                                      [&audit_file](const active::AuditEvent& e) { audit_file.append(e); });
    labelserver::ServerOptions opts;
    opts.host = host;
    opts.port = port;
    if (!f.static_dir.empty()) opts.static_dir = f.static_dir;
    labelserver::HttpServer server(service, opts);
    const int bound = server.bind();
    out << fmt::format("serving {} on http://{}:{}/ (Ctrl-C to stop)\n", inputs.theory, host, bound) << std::flush;
    g_server = &server;
    auto previous_int = std::signal(SIGINT, stop_server);
    auto previous_term = std::signal(SIGTERM, stop_server);
    server.serve();
    std::signal(SIGINT, previous_int);
    std::signal(SIGTERM, previous_term);
    g_server = nullptr;

    const fs::path dir(g.out);
    ensure_directory(dir);
    write_active_outputs(dir, *service.snapshot(), inputs, fs::path(f.train_dir) / "vocab.json", inputs.echo, out);
}

void run_active(const Globals& g, const ActiveFlags& f, std::ostream& out, std::istream& in) {
    if (f.serve) return run_serve(g, f, out);
    auto inputs = load_session_inputs(g, f);
    const fs::path dir(g.out);
    ensure_directory(dir);
    active::ActiveSession session(inputs.data, inputs.seed_train, inputs.test, inputs.config);
    out << fmt::format("{}: {} seed labels, {} test, {} in pool; seed F1 {:.3f}\n", inputs.theory,
                       inputs.seed_train.size(), inputs.test.size(), session.pool().size(),
                       session.metrics_history().back().f1);
    TerminalOracle oracle(in, out, f.annotator);
    while (!session.complete()) {
        const auto r = session.run_cycle(oracle);
        if (!r) {
            out << "\nstopped; the unfinished cycle was discarded\n";
            break;
        }
        out << fmt::format("cycle {} done: {} labeled, {} propagated, F1 {:.3f}\n", session.cycle(), r->accepted,
                           r->propagated_count, r->metrics.f1);
    }
    write_active_outputs(dir, session, inputs, fs::path(f.train_dir) / "vocab.json", inputs.echo, out);
}

// ---------------------------------------------------------------- classify

struct ClassifyFlags {
    std::string datasets;
    std::vector<std::string> models;
    std::string corpus;
    std::string domains;
    std::string stopwords = data_path("stopwords_en.txt");
};

void run_classify(const Globals& g, const ClassifyFlags& f, std::ostream& out) {
    const fs::path dir(g.out);
    ensure_directory(dir / "predictions");
    ensure_directory(dir / "misinfo");
    const auto stopwords = textfeat::load_stopwords(f.stopwords);
    const auto domains = load_domains(f.domains);
    std::vector<corpus::Tweet> link_corpus;
    if (!f.corpus.empty()) link_corpus = corpus::load_jsonl(f.corpus);

    ojson cfg = base_config("classify", g);
    cfg["models"] = ojson::array();
    std::vector<std::string> theory_order;
    std::map<std::string, std::vector<std::string>> dataset_sets, misinfo_sets;
    std::vector<fs::path> files;
    for (const auto& spec : f.models) {
        const auto [theory, model_dir] = parse_assignment(spec, "--model");
        const fs::path dataset_path = fs::path(f.datasets) / (theory + ".jsonl");
        if (!fs::exists(dataset_path)) throw UsageError("missing dataset " + dataset_path.string());
        const auto model = forest::ForestModel::load(model_dir / "model.json");
        auto vocab =
            std::make_shared<const textfeat::Vocabulary>(textfeat::Vocabulary::load(model_dir / "vocab.json"));
        if (model.vocab_hash() != vocab->hash())
            throw ParseError((model_dir / "model.json").string() + " does not match its vocab.json");
        const auto tweets = corpus::load_jsonl(dataset_path);
        const textfeat::LinkageIndex linkage(link_corpus.empty() ? tweets : link_corpus);
        const auto m = textfeat::build_feature_matrix(tweets, stopwords, vocab, domains, linkage);

        std::vector<double> proba(m.rows());
        parallel_for(m.rows(), [&](std::size_t r) { proba[r] = model.predict_proba(forest::row_of(m, r)); });

        const fs::path pred_path = dir / "predictions" / (theory + ".csv"),
                       mis_path = dir / "misinfo" / (theory + ".jsonl");
        std::vector<corpus::Tweet> misinfo;
        {
            std::ofstream p(pred_path, std::ios::binary | std::ios::trunc);
            if (!p) throw IoError("cannot write " + pred_path.string());
            CsvWriter csv(p);
            csv.row({"tweet_id", "proba", "misinfo"});
            for (std::size_t r = 0; r < m.rows(); ++r) {
                const bool pos = proba[r] >= 0.5;
                csv.row({tweets[r].id, format_fixed(proba[r], 6), pos ? "1" : "0"});
                if (pos) misinfo.push_back(tweets[r]);
            }
        }
        corpus::write_jsonl(mis_path, misinfo);
        files.push_back(pred_path);
        files.push_back(mis_path);

        theory_order.push_back(theory);
        for (const auto& t : tweets) dataset_sets[t.id].push_back(theory);
        for (const auto& t : misinfo) misinfo_sets[t.id].push_back(theory);
        out << fmt::format("{}: {} of {} tweets classified as misinformation\n", theory, misinfo.size(),
                           tweets.size());
        cfg["models"].push_back(ojson{{"theory", theory},
                                      {"dataset", file_ref(dataset_path)},
                                      {"model", file_ref(model_dir / "model.json")},
                                      {"vocab", file_ref(model_dir / "vocab.json")}});
    }
    const auto summarize = [&](const std::map<std::string, std::vector<std::string>>& sets) {
        std::vector<std::vector<std::string>> match_sets;
        for (const auto& [_, s] : sets) match_sets.push_back(s);
        return theoryfilter::summarize_matches(theory_order, match_sets);
    };
    const auto filtered = summarize(dataset_sets);
    const auto misinfo = summarize(misinfo_sets);
    const fs::path part = dir / "misinfo_partition.csv", edges = dir / "misinfo_edges.csv",
                   t2 = dir / "table2.csv";
    theoryfilter::write_partition_csv(misinfo, part);
    theoryfilter::write_edge_csv(misinfo, edges);
    report::write_table2_csv(report::table2(filtered, misinfo), t2);
    files.insert(files.end(), {part, edges, t2});

    if (!f.corpus.empty()) cfg["corpus"] = file_ref(f.corpus);
    if (!f.domains.empty()) cfg["domains"] = file_ref(f.domains);
    cfg["stopwords"] = file_ref(f.stopwords);
    finish(dir, files, cfg, out);
}

// ---------------------------------------------------------------- sentiment

struct SentimentFlags {
    std::string dataset;
    std::string predictions;
    std::string labels;
    std::string signed_lexicon;
    std::string emotion_lexicon;
    std::string stopwords = data_path("stopwords_en.txt");
    double loess_span = report::kDefaultLoessSpan;
};

void run_sentiment(const Globals& g, const SentimentFlags& f, std::ostream& out, std::ostream& err) {
    if (f.predictions.empty() == f.labels.empty()) throw UsageError("pass exactly one of --predictions and --labels");
    if (!(f.loess_span > 0.0 && f.loess_span <= 1.0)) throw UsageError("--loess-span must be in (0, 1]");
    const fs::path dir(g.out);
    ensure_directory(dir);
    std::vector<std::string> warnings;
    const auto signed_lex = sentiment::load_signed_lexicon(f.signed_lexicon, &warnings);
    const auto emotion_lex = sentiment::load_emotion_lexicon(f.emotion_lexicon, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << '\n';
    const auto stopwords = textfeat::load_stopwords(f.stopwords);
    const auto tweets = corpus::load_jsonl(f.dataset);

    std::unordered_map<std::string, bool> classes;
    if (!f.predictions.empty()) {
        const CsvTable t = read_csv(f.predictions);
        const std::size_t c_id = t.column("tweet_id"), c_m = t.column("misinfo");
        for (const auto& r : t.rows) classes[r.at(c_id)] = r.at(c_m) == "1";
    } else {
        for (const auto& r : read_labels(f.labels))
            if (active::is_definite(r.label)) classes[r.id] = r.label == active::Label::Misinfo;
    }

    const auto records = sentiment::score_corpus(tweets, stopwords, signed_lex, emotion_lex);
    const auto cells = sentiment::aggregate_series(records, classes);
    const fs::path rec_path = dir / "sentiment_records.csv", series_path = dir / "sentiment_series.csv",
                   trend_path = dir / "sentiment_trend.csv";
    sentiment::write_records_csv(records, rec_path);
    sentiment::write_series_csv(cells, series_path);
    report::write_sentiment_trend_csv(cells, f.loess_span, trend_path);
    out << fmt::format("scored {} tweets over {} days\n", records.size(), cells.size() / 2);

    ojson cfg = base_config("sentiment", g);
    cfg["dataset"] = file_ref(f.dataset);
    if (!f.predictions.empty()) cfg["predictions"] = file_ref(f.predictions);
    if (!f.labels.empty()) cfg["labels"] = file_ref(f.labels);
    cfg["signed_lexicon"] = file_ref(f.signed_lexicon);
    cfg["emotion_lexicon"] = file_ref(f.emotion_lexicon);
    cfg["stopwords"] = file_ref(f.stopwords);
    cfg["loess_span"] = f.loess_span;
    finish(dir, {rec_path, series_path, trend_path}, cfg, out);
}

// ---------------------------------------------------------------- dtm

struct DtmFlags {
    std::string dataset;
    std::string topics = "2";
    std::string epoch;
    int slice_days = 7;
    double min_df = 0.005;
    bool bigrams = false;
    std::size_t top = 10;
    std::vector<std::string> terms;
    dtm::DtmConfig config;
    std::string stopwords = data_path("stopwords_en.txt");
};

/// "3", "2,4,6" or "2-5".
std::vector<int> parse_topic_list(const std::string& text) {
    std::vector<int> ks;
    try {
        for (const auto& part : split(text, ',')) {
            const auto dash = part.find('-');
            if (dash == std::string::npos) {
                ks.push_back(std::stoi(part));
            } else {
                const int a = std::stoi(part.substr(0, dash)), b = std::stoi(part.substr(dash + 1));
                if (a > b) throw UsageError("empty topic range " + part);
                for (int k = a; k <= b; ++k) ks.push_back(k);
            }
        }
    } catch (const std::logic_error&) {
        throw UsageError("--topics expects a list like 2,3 or a range like 2-5, got '" + text + "'");
    }
    if (ks.empty()) throw UsageError("--topics is empty");
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    return ks;
}

void run_dtm(const Globals& g, const DtmFlags& f, std::ostream& out) {
    const auto ks = parse_topic_list(f.topics);
    if (f.slice_days < 1) throw UsageError("--slice-days must be at least 1");
    const fs::path dir(g.out);
    ensure_directory(dir);
    const auto tweets = corpus::load_jsonl(f.dataset);
    if (tweets.empty()) throw InvalidArgument("dataset is empty: " + f.dataset);
    const auto stopwords = textfeat::load_stopwords(f.stopwords);

    Timestamp epoch;
    if (f.epoch.empty()) {
        Timestamp first = tweets.front().created_at;
        for (const auto& t : tweets) first = std::min(first, t.created_at);
        epoch = std::chrono::floor<std::chrono::days>(first);
    } else {
        const auto parsed = parse_timestamp(f.epoch.size() == 10 ? f.epoch + "T00:00:00Z" : f.epoch);
        if (!parsed) throw UsageError("--epoch is not a date: " + f.epoch);
        epoch = *parsed;
    }
    std::vector<std::vector<std::string>> token_docs;
    for (const auto& t : tweets) token_docs.push_back(textfeat::tokenize(t.text, stopwords));
    const auto vocab = textfeat::build_vocabulary(token_docs, f.min_df, f.bigrams);
    const auto sliced =
        dtm::slice_corpus(tweets, stopwords, vocab, epoch, std::chrono::days{f.slice_days});
    out << fmt::format("{} documents in {} slices, vocabulary {} terms\n", sliced.doc_count(), sliced.slice_count(),
                       vocab.size());

    std::vector<fs::path> files{dir / "vocab.json", dir / "comparison.csv"};
    vocab.save(files[0]);
    std::ofstream cmp(files[1], std::ios::binary | std::ios::trunc);
    if (!cmp) throw IoError("cannot write " + files[1].string());
    CsvWriter cmp_csv(cmp);
    cmp_csv.row({"topics", "per_word_log_likelihood", "final_elbo", "em_passes"});
    for (const int k : ks) {
        dtm::DtmConfig config = f.config;
        config.n_topics = k;
        config.seed = g.seed;
        validate(config);
        const auto model = dtm::fit_dtm(sliced, config);
        const fs::path kd = dir / fmt::format("k{}", k);
        ensure_directory(kd);
        const fs::path model_path = kd / "model.json", topics_path = kd / "topics.csv",
                       traj_path = kd / "trajectory.csv", mass_path = kd / "slice_mass.csv";
        write_file(model_path, model.to_json(&vocab));
        dtm::write_topics_csv(model, vocab, std::min(f.top, vocab.size()), topics_path);
        std::vector<std::string> terms = f.terms;
        if (terms.empty()) {
            std::set<std::string> seen;
            for (std::size_t topic = 0; topic < model.n_topics(); ++topic)
                for (const auto& w : model.top_words(topic, 0, std::min<std::size_t>(3, vocab.size())))
                    if (seen.insert(vocab.term(w.index)).second) terms.push_back(vocab.term(w.index));
        }
        dtm::write_trajectory_csv(model, vocab, terms, traj_path);
        dtm::write_slice_mass_csv(dtm::slice_topic_mass(model, sliced), mass_path);
        const double ll = dtm::per_word_log_likelihood(model, sliced);
        cmp_csv.row({std::to_string(k), format_fixed(ll, 6), format_fixed(model.elbo_trace().back(), 6),
                     std::to_string(model.elbo_trace().size())});
        files.insert(files.end(), {model_path, topics_path, traj_path, mass_path});
        out << fmt::format("K={}: {} EM passes, per-word log-likelihood {:.4f}\n", k, model.elbo_trace().size(), ll);
    }
    cmp.close();
    if (!cmp) throw IoError("write failed for " + files[1].string());

    ojson cfg = base_config("dtm", g);
    cfg["dataset"] = file_ref(f.dataset);
    cfg["stopwords"] = file_ref(f.stopwords);
    cfg["topics"] = ks;
    cfg["epoch"] = format_timestamp(epoch);
    cfg["slice_days"] = f.slice_days;
    cfg["min_df"] = f.min_df;
    cfg["bigrams"] = f.bigrams;
    cfg["chain_variance"] = f.config.chain_variance;
    cfg["doc_topic_prior"] = f.config.doc_topic_prior;
    cfg["em_max_passes"] = f.config.em_max_passes;
    cfg["elbo_rel_tol"] = f.config.elbo_rel_tol;
    cfg["obs_variance"] = f.config.obs_variance;
    cfg["init_variance"] = f.config.init_variance;
    finish(dir, files, cfg, out);
}

// ---------------------------------------------------------------- report

struct ReportFlags {
    std::string partition;
    std::string misinfo;
    std::vector<std::string> labels;
    std::vector<std::string> metrics;
    std::string sentiment;
    std::vector<std::string> extra;
    double loess_span = report::kDefaultLoessSpan;
};

void run_report(const Globals& g, const ReportFlags& f, std::ostream& out) {
    if (!(f.loess_span > 0.0 && f.loess_span <= 1.0)) throw UsageError("--loess-span must be in (0, 1]");
    report::ReportArtifacts a;
    a.loess_span = f.loess_span;
    a.config = base_config("report", g);
    const auto load_partition = [](const fs::path& d, const char* counts, const char* edges) {
        for (const auto& p : {d / counts, d / edges})
            if (!fs::exists(p)) throw UsageError("missing " + p.string());
        return theoryfilter::read_partition_csv(d / counts, d / edges);
    };
    if (!f.partition.empty()) {
        const fs::path d(f.partition);
        a.partition = load_partition(d, "partition.csv", "edges.csv");
        a.config["partition"] = ojson::array({file_ref(d / "partition.csv"), file_ref(d / "edges.csv")});
    }
    if (!f.misinfo.empty()) {
        const fs::path d(f.misinfo);
        a.misinfo_partition = load_partition(d, "misinfo_partition.csv", "misinfo_edges.csv");
        a.config["misinfo"] =
            ojson::array({file_ref(d / "misinfo_partition.csv"), file_ref(d / "misinfo_edges.csv")});
    }
    if (a.misinfo_partition && !a.partition) throw UsageError("--misinfo needs --partition");
    a.config["labels"] = ojson::array();
    for (const auto& spec : f.labels) {
        const auto [theory, path] = parse_assignment(spec, "--labels");
        report::Table3Row row{theory, 0, 0};
        for (const auto& r : read_labels(path)) {
            if (r.label == active::Label::Misinfo) ++row.misinfo;
            if (r.label == active::Label::NotMisinfo) ++row.not_misinfo;
        }
        a.label_distribution.push_back(row);
        a.config["labels"].push_back(ojson{{"theory", theory}, {"input", file_ref(path)}});
    }
    a.config["metrics"] = ojson::array();
    for (const auto& path : f.metrics) {
        std::vector<std::string> variants;
        const auto rows = report::read_metrics_csv(path, &variants);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& [theory, m] = rows[i];
            auto it = std::find_if(a.metrics.begin(), a.metrics.end(),
                                   [&, &th = theory](const report::Table4Row& r) { return r.theory == th; });
            if (it == a.metrics.end()) {
                a.metrics.push_back({theory, {}, std::nullopt});
                it = a.metrics.end() - 1;
            }
            if (variants[i] == "rf_active")
                it->rf_active = m;
            else
                it->rf = m;
        }
        a.config["metrics"].push_back(file_ref(path));
    }
    if (!f.sentiment.empty()) {
        a.sentiment = sentiment::read_series_csv(f.sentiment);
        a.config["sentiment"] = file_ref(f.sentiment);
        a.config["loess_span"] = f.loess_span;
    }
    a.config["extra"] = ojson::array();
    for (const auto& e : f.extra) {
        a.extra_files.emplace_back(e);
        a.config["extra"].push_back(file_ref(e));
    }
    const fs::path dir(g.out);
    const auto entries = report::export_report(a, dir);
    for (const auto& e : entries) out << "  " << e.file << (e.rows ? fmt::format(" ({} rows)", e.rows) : "") << '\n';
    out << "wrote " << (dir / "manifest.json").string() << '\n';
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::istream& in) {
    CLI::App app{"Conspiracy-theory misinformation pipeline: filter, classify, label, score and model tweets"};
    app.name("infodemic");
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "INI/TOML file with flag values; command-line flags take precedence");

    Globals g;
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--out", g.out, "Output directory")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->capture_default_str();

    IngestFlags ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Load tweet JSONL, filter by language and deduplicate");
    c_ingest->add_option("--input", ingest.input, "Tweet JSONL file")->required()->check(CLI::ExistingFile);
    c_ingest->add_option("--lang", ingest.lang, "Language filter; empty keeps all")->capture_default_str();
    c_ingest->add_option("--dedup", ingest.dedup, "Duplicate key: id, text or none")
        ->check(CLI::IsMember({"id", "text", "none"}))
        ->capture_default_str();

    FilterFlags filter;
    auto* c_filter = app.add_subcommand("filter", "Partition the corpus into theory datasets");
    c_filter->add_option("--corpus", filter.corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    c_filter->add_option("--theories", filter.theories, "Theory config")->check(CLI::ExistingFile)->capture_default_str();

    SampleFlags sample;
    auto* c_sample = app.add_subcommand("sample", "Draw a training pool and remove duplicate texts");
    c_sample->add_option("--dataset", sample.dataset, "Theory dataset JSONL")->required()->check(CLI::ExistingFile);
    c_sample->add_option("--n", sample.n, "Tweets to draw")->capture_default_str();

    TrainFlags train;
    auto* c_train = app.add_subcommand("train", "Split, balance, fit and evaluate a forest");
    c_train->add_option("--dataset", train.dataset, "Theory dataset JSONL")->required()->check(CLI::ExistingFile);
    c_train->add_option("--labels", train.labels, "CSV tweet_id,label")->required()->check(CLI::ExistingFile);
    c_train->add_option("--co-rater-labels", train.co_rater_labels, "Second-rater CSV used to resolve uncertain labels")
        ->check(CLI::ExistingFile);
    c_train->add_option("--theory", train.theory, "Theory name (default: dataset file stem)");
    c_train->add_option("--domains", train.domains, "Flagged-domain CSV")->check(CLI::ExistingFile);
    c_train->add_option("--stopwords", train.stopwords, "Stopword list")->check(CLI::ExistingFile)->capture_default_str();
    c_train->add_option("--train-fraction", train.train_fraction, "Training share")->capture_default_str();
    c_train->add_option("--min-df", train.min_df, "Minimum document frequency fraction")->capture_default_str();
    c_train->add_option("--trained-at", train.trained_at, "Timestamp recorded in the model");
    train.forest.add(c_train);

    ActiveFlags act;
    const auto add_active = [&](CLI::App* c) {
        c->add_option("--dataset", act.dataset, "Theory dataset JSONL (the pool)")->check(CLI::ExistingFile);
        c->add_option("--train-dir", act.train_dir, "Output directory of train")->check(CLI::ExistingDirectory);
        c->add_option("--theory", act.theory, "Theory name (default: dataset file stem)");
        c->add_option("--domains", act.domains, "Flagged-domain CSV")->check(CLI::ExistingFile);
        c->add_option("--stopwords", act.stopwords, "Stopword list")->check(CLI::ExistingFile)->capture_default_str();
        c->add_option("--k", act.k, "Queries per cycle")->capture_default_str();
        c->add_option("--cycles", act.cycles, "Active-learning cycles")->capture_default_str();
        c->add_option("--sim-threshold", act.sim_threshold, "Propagation similarity threshold")->capture_default_str();
        c->add_option("--strategy", act.strategy, "Query strategy")
            ->check(CLI::IsMember({"entropy", "random"}))
            ->capture_default_str();
        c->add_option("--addr", act.addr, "Server address HOST:PORT")->capture_default_str();
        c->add_option("--session-dir", act.session_dir, "Server session directory (default: OUT/session)");
        c->add_option("--static-dir", act.static_dir, "Annotator UI bundle to serve")->check(CLI::ExistingDirectory);
    };
    auto* c_active = app.add_subcommand("active", "Run active-learning cycles with a terminal oracle or a server");
    add_active(c_active);
    c_active->add_option("--annotator", act.annotator, "Annotator id for terminal labels")->capture_default_str();
    c_active->add_flag("--serve", act.serve, "Serve the session over HTTP instead of prompting");
    auto* c_serve = app.add_subcommand("serve", "Serve an active-learning session over HTTP");
    add_active(c_serve);

    ClassifyFlags classify;
    auto* c_classify = app.add_subcommand("classify", "Label full theory datasets with trained models");
    c_classify->add_option("--datasets", classify.datasets, "datasets/ directory written by filter")
        ->required()
        ->check(CLI::ExistingDirectory);
    c_classify->add_option("--model", classify.models, "THEORY=DIR with model.json and vocab.json (repeatable)")
        ->required();
    c_classify->add_option("--corpus", classify.corpus, "Corpus used to resolve replies and retweets")
        ->check(CLI::ExistingFile);
    c_classify->add_option("--domains", classify.domains, "Flagged-domain CSV")->check(CLI::ExistingFile);
    c_classify->add_option("--stopwords", classify.stopwords, "Stopword list")
        ->check(CLI::ExistingFile)
        ->capture_default_str();

    SentimentFlags senti;
    auto* c_senti = app.add_subcommand("sentiment", "Score tweets and aggregate daily means per class");
    c_senti->add_option("--dataset", senti.dataset, "Tweet JSONL")->required()->check(CLI::ExistingFile);
    c_senti->add_option("--predictions", senti.predictions, "Predictions CSV from classify")->check(CLI::ExistingFile);
    c_senti->add_option("--labels", senti.labels, "CSV tweet_id,label")->check(CLI::ExistingFile);
    c_senti->add_option("--signed-lexicon", senti.signed_lexicon, "term<TAB>score")
        ->check(CLI::ExistingFile)
        ->required();
    c_senti->add_option("--emotion-lexicon", senti.emotion_lexicon, "term<TAB>category<TAB>0|1")
        ->check(CLI::ExistingFile)
        ->required();
    c_senti->add_option("--stopwords", senti.stopwords, "Stopword list")->check(CLI::ExistingFile)->capture_default_str();
    c_senti->add_option("--loess-span", senti.loess_span, "Trend smoothing span")->capture_default_str();

    DtmFlags dtmf;
    auto* c_dtm = app.add_subcommand("dtm", "Fit dynamic topic models over weekly slices");
    c_dtm->add_option("--dataset", dtmf.dataset, "Tweet JSONL")->required()->check(CLI::ExistingFile);
    c_dtm->add_option("--topics", dtmf.topics, "Topic counts, e.g. 2-5 or 2,4")->capture_default_str();
    c_dtm->add_option("--epoch", dtmf.epoch, "Start of slice 0 (default: first tweet's day)");
    c_dtm->add_option("--slice-days", dtmf.slice_days, "Slice width in days")->capture_default_str();
    c_dtm->add_option("--min-df", dtmf.min_df, "Minimum document frequency fraction")->capture_default_str();
    c_dtm->add_flag("--bigrams", dtmf.bigrams, "Include bigrams in the vocabulary");
    c_dtm->add_option("--top", dtmf.top, "Words per topic in topics.csv")->capture_default_str();
    c_dtm->add_option("--term", dtmf.terms, "Term to track in trajectory.csv (repeatable)");
    c_dtm->add_option("--chain-variance", dtmf.config.chain_variance, "Random-walk variance")->capture_default_str();
    c_dtm->add_option("--alpha", dtmf.config.doc_topic_prior, "Document-topic prior")->capture_default_str();
    c_dtm->add_option("--passes", dtmf.config.em_max_passes, "Maximum EM passes")->capture_default_str();
    c_dtm->add_option("--tol", dtmf.config.elbo_rel_tol, "Relative ELBO tolerance")->capture_default_str();
    c_dtm->add_option("--obs-variance", dtmf.config.obs_variance, "Pseudo-observation variance")
        ->capture_default_str();
    c_dtm->add_option("--init-variance", dtmf.config.init_variance, "First-slice prior variance")
        ->capture_default_str();
    c_dtm->add_option("--stopwords", dtmf.stopwords, "Stopword list")->check(CLI::ExistingFile)->capture_default_str();

    ReportFlags rep;
    auto* c_report = app.add_subcommand("report", "Collate tables, figures and a manifest");
    c_report->add_option("--partition", rep.partition, "Output directory of filter")->check(CLI::ExistingDirectory);
    c_report->add_option("--misinfo", rep.misinfo, "Output directory of classify")->check(CLI::ExistingDirectory);
    c_report->add_option("--labels", rep.labels, "THEORY=CSV of hand labels (repeatable)");
    c_report->add_option("--metrics", rep.metrics, "metrics.csv from train or active (repeatable)")
        ->check(CLI::ExistingFile);
    c_report->add_option("--sentiment", rep.sentiment, "sentiment_series.csv")->check(CLI::ExistingFile);
    c_report->add_option("--extra", rep.extra, "File copied into the report (repeatable)")->check(CLI::ExistingFile);
    c_report->add_option("--loess-span", rep.loess_span, "Trend smoothing span")->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion& e) {
        out << "infodemic 1.0\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    set_thread_count(g.threads);
    try {
        if (c_ingest->parsed()) run_ingest(g, ingest, out);
        else if (c_filter->parsed()) run_filter(g, filter, out);
        else if (c_sample->parsed()) run_sample(g, sample, out);
        else if (c_train->parsed()) run_train(g, train, out);
        else if (c_active->parsed()) {
            if (!act.serve && (act.dataset.empty() || act.train_dir.empty()))
                throw UsageError("active needs --dataset and --train-dir");
            run_active(g, act, out, in);
        } else if (c_serve->parsed())
            run_serve(g, act, out);
        else if (c_classify->parsed()) run_classify(g, classify, out);
        else if (c_senti->parsed()) run_sentiment(g, senti, out, err);
        else if (c_dtm->parsed()) run_dtm(g, dtmf, out);
        else if (c_report->parsed()) run_report(g, rep, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr, std::cin);
}

} // namespace infodemic::cli
