#include "infodemic/labelserver.hpp"

#include "infodemic/error.hpp"
#include "infodemic/io.hpp"

#include <httplib.h>

#include <fstream>
#include <set>
#include <sstream>

namespace infodemic::labelserver {

using nlohmann::json;

namespace {

json metrics_json(const forest::Metrics& m) {
    return json{{"accuracy", m.accuracy}, {"recall", m.recall},     {"precision", m.precision},
                {"f1", m.f1},             {"tp", m.confusion.tp},   {"fp", m.confusion.fp},
                {"fn", m.confusion.fn},   {"tn", m.confusion.tn}};
}

} // namespace

json to_json(const BatchResponse& b) {
    json items = json::array();
    for (const auto& i : b.items)
        items.push_back({{"tweet_id", i.tweet_id}, {"text", i.text}, {"proba", i.proba}, {"entropy", i.entropy}});
    return json{{"cycle", b.cycle},
                {"n_cycles", b.n_cycles},
                {"complete", b.complete},
                {"session_revision", b.session_revision},
                {"items", std::move(items)}};
}

json to_json(const SubmitResult& r) {
    json rejected = json::array();
    for (const auto& x : r.rejected) rejected.push_back({{"tweet_id", x.tweet_id}, {"reason", x.reason}});
    return json{{"accepted", r.accepted},
                {"propagated_count", r.propagated_count},
                {"rejected", std::move(rejected)},
                {"new_metrics", metrics_json(r.new_metrics)},
                {"cycle", r.cycle},
                {"session_revision", r.session_revision}};
}

json to_json(const StatusResponse& s) {
    json history = json::array();
    for (const auto& m : s.metrics_history) history.push_back(metrics_json(m));
    return json{{"cycle", s.cycle},
                {"n_cycles", s.n_cycles},
                {"complete", s.complete},
                {"busy", s.busy},
                {"labeled_count", s.labeled_count},
                {"pool_count", s.pool_count},
                {"session_revision", s.session_revision},
                {"metrics_history", std::move(history)}};
}

LabelSubmission parse_submission(std::string_view body) {
    try {
        const json j = json::parse(body);
        LabelSubmission s;
        s.session_revision = j.at("session_revision").get<std::uint64_t>();
        for (const auto& e : j.at("labels")) {
            LabelEntry entry;
            entry.tweet_id = e.at("tweet_id").get<std::string>();
            entry.label = e.at("label").get<std::string>();
            entry.annotator_id = e.value("annotator_id", std::string{});
            s.labels.push_back(std::move(entry));
        }
        return s;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed label submission: ") + e.what());
    }
}

std::string metrics_csv(const std::vector<forest::Metrics>& history) {
    std::ostringstream out;
    CsvWriter csv(out);
    csv.row({"cycle", "accuracy", "recall", "precision", "f1", "tp", "fp", "fn", "tn"});
    for (std::size_t i = 0; i < history.size(); ++i) {
        const auto& m = history[i];
        csv.row({std::to_string(i), format_fixed(m.accuracy, 6), format_fixed(m.recall, 6),
                 format_fixed(m.precision, 6), format_fixed(m.f1, 6), std::to_string(m.confusion.tp),
                 std::to_string(m.confusion.fp), std::to_string(m.confusion.fn), std::to_string(m.confusion.tn)});
    }
    return out.str();
}

LabelService::LabelService(active::ActiveSession session, AuditSink sink)
    : session_(std::make_shared<const active::ActiveSession>(std::move(session))), sink_(std::move(sink)) {
    audit_emitted_ = session_->audit().size();
}

std::shared_ptr<const active::ActiveSession> LabelService::snapshot() const {
    std::lock_guard lock(state_mutex_);
    return session_;
}

std::uint64_t LabelService::revision() const {
    std::lock_guard lock(state_mutex_);
    return revision_;
}

BatchResponse LabelService::compute_batch(const active::ActiveSession& s, std::uint64_t revision) const {
    BatchResponse b;
    b.cycle = s.cycle();
    b.n_cycles = s.n_cycles();
    b.complete = s.complete();
    b.session_revision = revision;
    if (b.complete) return b;
    for (auto& item : s.next_batch(s.config().k_per_cycle)) {
        BatchItem bi;
        bi.tweet_id = item.id;
        bi.text = s.data().texts[s.data().row_of(item.id)];
        bi.proba = item.proba;
        bi.entropy = active::binary_entropy(item.proba);
        b.items.push_back(std::move(bi));
    }
    return b;
}

BatchResponse LabelService::get_batch() {
    std::shared_ptr<const active::ActiveSession> s;
    std::uint64_t rev;
    {
        std::lock_guard lock(state_mutex_);
        if (batch_cache_ && batch_cache_->session_revision == revision_) return *batch_cache_;
        s = session_;
        rev = revision_;
    }
    BatchResponse b = compute_batch(*s, rev);
    std::lock_guard lock(state_mutex_);
    if (revision_ == rev) batch_cache_ = b;
    return b;
}

SubmitResult LabelService::submit_labels(const LabelSubmission& submission) {
    std::lock_guard writer(writer_mutex_);
    const auto current = snapshot();
    const std::uint64_t rev = revision();
    if (submission.session_revision != rev)
        throw ConflictError("stale session revision " + std::to_string(submission.session_revision) +
                            "; current revision is " + std::to_string(rev));
    if (current->complete()) throw OutOfRange("the active-learning session is complete");

    const BatchResponse batch = get_batch();
    std::set<std::string> served;
    for (const auto& item : batch.items) served.insert(item.tweet_id);

    SubmitResult result;
    std::vector<active::OracleResponse> responses;
    std::set<std::string> seen;
    for (const auto& entry : submission.labels) {
        if (!served.count(entry.tweet_id)) {
            result.rejected.push_back({entry.tweet_id, "not in the current batch"});
            continue;
        }
        if (!seen.insert(entry.tweet_id).second) {
            result.rejected.push_back({entry.tweet_id, "duplicate entry"});
            continue;
        }
        try {
            responses.push_back({entry.tweet_id, active::parse_label(entry.label), entry.annotator_id});
        } catch (const ParseError&) {
            result.rejected.push_back({entry.tweet_id, "invalid label '" + entry.label + "'"});
        }
    }
    if (responses.empty()) {
        result.new_metrics = current->metrics_history().back();
        result.cycle = current->cycle();
        result.session_revision = rev;
        return result;
    }

    busy_ = true;
    auto next = std::make_shared<active::ActiveSession>(*current);
    active::CycleResult cycle;
    try {
        cycle = next->apply_labels(responses);
    } catch (...) {
        busy_ = false;
        throw;
    }
    busy_ = false;
    for (const auto& id : cycle.rejected) result.rejected.push_back({id, "not in the pool"});
    result.accepted = cycle.accepted;
    result.propagated_count = cycle.propagated_count;
    result.new_metrics = cycle.metrics;
    result.cycle = next->cycle();

    if (sink_)
        for (std::size_t i = audit_emitted_; i < next->audit().size(); ++i) sink_(next->audit()[i]);
    audit_emitted_ = next->audit().size();
    {
        std::lock_guard lock(state_mutex_);
        session_ = std::move(next);
        ++revision_;
        batch_cache_.reset();
        result.session_revision = revision_;
    }
    return result;
}

StatusResponse LabelService::get_status() const {
    std::shared_ptr<const active::ActiveSession> s;
    StatusResponse st;
    {
        std::lock_guard lock(state_mutex_);
        s = session_;
        st.session_revision = revision_;
    }
    st.cycle = s->cycle();
    st.n_cycles = s->n_cycles();
    st.complete = s->complete();
    st.busy = busy_;
    st.labeled_count = s->labeled().size();
    st.pool_count = s->pool().size();
    st.metrics_history = s->metrics_history();
    return st;
}

AuditFile::AuditFile(std::filesystem::path path) : path_(std::move(path)) {}

void AuditFile::append(const active::AuditEvent& event) {
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append to " + path_.string());
    out << active::to_json_line(event) << '\n';
    out.flush();
    if (!out) throw IoError("write failed for " + path_.string());
}

struct HttpServer::Impl {
    LabelService& service;
    ServerOptions options;
    httplib::Server server;
    int port = -1;

    Impl(LabelService& s, ServerOptions o) : service(s), options(std::move(o)) {}

    static void error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
        res.status = status;
        res.set_content(json{{"code", code}, {"message", message}}.dump(), "application/json");
    }

    void routes() {
        server.Get("/api/v1/batch", [this](const httplib::Request&, httplib::Response& res) {
            try {
                res.set_content(to_json(service.get_batch()).dump(), "application/json");
            } catch (const std::exception& e) {
                error(res, 500, "internal", e.what());
            }
        });
        server.Post("/api/v1/labels", [this](const httplib::Request& req, httplib::Response& res) {
            try {
                const auto submission = parse_submission(req.body);
                res.set_content(to_json(service.submit_labels(submission)).dump(), "application/json");
            } catch (const ParseError& e) {
                error(res, 400, "bad_request", e.what());
            } catch (const ConflictError& e) {
                error(res, 409, "stale_revision", e.what());
            } catch (const OutOfRange& e) {
                error(res, 410, "session_complete", e.what());
            } catch (const std::exception& e) {
                error(res, 500, "internal", e.what());
            }
        });
        server.Get("/api/v1/status", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(to_json(service.get_status()).dump(), "application/json");
        });
        server.Get("/api/v1/metrics.csv", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(metrics_csv(service.get_status().metrics_history), "text/csv");
        });
        if (options.static_dir && !server.set_mount_point("/", options.static_dir->string()))
            throw IoError("static directory not found: " + options.static_dir->string());
    }
};

HttpServer::HttpServer(LabelService& service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
    impl_->routes();
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
    if (impl_->options.port == 0)
        impl_->port = impl_->server.bind_to_any_port(impl_->options.host);
    else
        impl_->port = impl_->server.bind_to_port(impl_->options.host, impl_->options.port) ? impl_->options.port : -1;
    if (impl_->port < 0)
        throw IoError("cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
    return impl_->port;
}

void HttpServer::serve() {
    if (impl_->port < 0) throw InvalidArgument("server is not bound");
    impl_->server.listen_after_bind();
}

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

} // namespace infodemic::labelserver
