#pragma once

#include "infodemic/active.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace infodemic::labelserver {

struct BatchItem {
    std::string tweet_id;
    std::string text;
    double proba = 0.0;
    double entropy = 0.0;
};

struct BatchResponse {
    int cycle = 0;
    int n_cycles = 0;
    bool complete = false;
    std::uint64_t session_revision = 0;
    std::vector<BatchItem> items;
};

struct LabelEntry {
    std::string tweet_id;
    std::string label; // as sent; parsed by the service
    std::string annotator_id;
};

struct LabelSubmission {
    std::uint64_t session_revision = 0;
    std::vector<LabelEntry> labels;
};

struct Rejection {
    std::string tweet_id;
    std::string reason;
};

struct SubmitResult {
    std::size_t accepted = 0;
    std::size_t propagated_count = 0;
    std::vector<Rejection> rejected;
    forest::Metrics new_metrics;
    int cycle = 0;
    std::uint64_t session_revision = 0;
};

struct StatusResponse {
    int cycle = 0;
    int n_cycles = 0;
    bool complete = false;
    bool busy = false;
    std::size_t labeled_count = 0;
    std::size_t pool_count = 0;
    std::uint64_t session_revision = 0;
    std::vector<forest::Metrics> metrics_history;
};

nlohmann::json to_json(const BatchResponse& b);
nlohmann::json to_json(const SubmitResult& r);
nlohmann::json to_json(const StatusResponse& s);
/// Throws ParseError on a malformed body.
LabelSubmission parse_submission(std::string_view body);
/// cycle,accuracy,recall,precision,f1,tp,fp,fn,tn
std::string metrics_csv(const std::vector<forest::Metrics>& history);

/// Receives each new audit event once, in order.
using AuditSink = std::function<void(const active::AuditEvent&)>;

/// Single-writer, many-reader wrapper over an ActiveSession. Readers work on
/// an immutable snapshot, so a retrain in progress never blocks them.
class LabelService {
public:
    LabelService(active::ActiveSession session, AuditSink sink = {});

    /// The current query batch; identical on repeated calls until a
    /// submission changes the revision.
    BatchResponse get_batch();
    /// Applies the labels of the current batch. Throws ConflictError when the
    /// revision is stale and OutOfRange once the session is complete. Entries
    /// outside the batch or with an unreadable label are rejected one by one.
    SubmitResult submit_labels(const LabelSubmission& submission);
    StatusResponse get_status() const;

    std::shared_ptr<const active::ActiveSession> snapshot() const;
    std::uint64_t revision() const;

private:
    BatchResponse compute_batch(const active::ActiveSession& s, std::uint64_t revision) const;

    mutable std::mutex state_mutex_;
    std::mutex writer_mutex_;
    std::shared_ptr<const active::ActiveSession> session_;
    std::uint64_t revision_ = 0;
    std::optional<BatchResponse> batch_cache_;
    std::size_t audit_emitted_ = 0;
    AuditSink sink_;
    std::atomic<bool> busy_{false};
};

/// Appends audit events as JSON lines, flushing after each one.
class AuditFile {
public:
    explicit AuditFile(std::filesystem::path path);
    void append(const active::AuditEvent& event);
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    std::mutex mutex_;
};

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::optional<std::filesystem::path> static_dir;
};

/// HTTP front end: GET /api/v1/batch, POST /api/v1/labels, GET /api/v1/status,
/// GET /api/v1/metrics.csv, plus static files. Errors are JSON {code, message};
/// a stale revision answers 409.
class HttpServer {
public:
    HttpServer(LabelService& service, ServerOptions options);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds; port 0 picks a free port. Returns the bound port.
    int bind();
    /// Serves until stop(). bind() must have succeeded.
    void serve();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace infodemic::labelserver
