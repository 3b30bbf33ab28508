#include "infodemic/error.hpp"
#include "infodemic/labelserver.hpp"

#include "../support/synthetic.hpp"

#include <doctest.h>
#include <httplib.h>

#include <thread>

using namespace infodemic;
using namespace infodemic::labelserver;
using nlohmann::json;

namespace {

struct Fixture {
    synth::LabeledCorpus corpus = synth::noisy_boundary_corpus(160, 12);
    std::shared_ptr<const active::ActiveDataset> data;
    std::vector<forest::LabeledId> seed, test;

    Fixture() {
        const auto vocab = synth::vocabulary_for(corpus.tweets);
        data = std::make_shared<const active::ActiveDataset>(
            active::make_dataset(corpus.tweets, {}, vocab, {}, textfeat::LinkageIndex(corpus.tweets)));
        for (std::size_t i = 0; i < corpus.tweets.size(); ++i) {
            const forest::LabeledId e{corpus.tweets[i].id, corpus.labels[i]};
            if (i < 50) test.push_back(e);
            else if (i < 70) seed.push_back(e);
        }
    }

    active::ActiveSession session(int cycles = 2) const {
        active::ActiveConfig c;
        c.forest.n_trees = 10;
        c.n_cycles = cycles;
        return active::ActiveSession(data, seed, test, c);
    }
};

LabelSubmission answer(const BatchResponse& batch, const char* label = "misinfo") {
    LabelSubmission s;
    s.session_revision = batch.session_revision;
    for (const auto& item : batch.items) s.labels.push_back({item.tweet_id, label, "ann"});
    return s;
}

} // namespace

TEST_CASE("submission parsing") {
    const auto s = parse_submission(
        R"({"session_revision": 4, "labels": [{"tweet_id": "a", "label": "misinfo", "annotator_id": "x"},
                                              {"tweet_id": "b", "label": "u"}]})");
    CHECK(s.session_revision == 4);
    REQUIRE(s.labels.size() == 2);
    CHECK(s.labels[1].annotator_id.empty());
    CHECK_THROWS_AS(parse_submission("{"), ParseError);
    CHECK_THROWS_AS(parse_submission(R"({"labels": []})"), ParseError);
    CHECK_THROWS_AS(parse_submission(R"({"session_revision": 1, "labels": [{"tweet_id": 3, "label": "m"}]})"),
                    ParseError);
}

TEST_CASE("metrics csv") {
    const auto csv = metrics_csv({forest::metrics_from_confusion({1, 1, 1, 1})});
    CHECK(csv == "cycle,accuracy,recall,precision,f1,tp,fp,fn,tn\n0,0.500000,0.500000,0.500000,0.500000,1,1,1,1\n");
}

TEST_CASE("service batches are stable per revision") {
    const Fixture f;
    std::vector<active::AuditEvent> sunk;
    LabelService service(f.session(), [&](const active::AuditEvent& e) { sunk.push_back(e); });
    const auto a = service.get_batch();
    const auto b = service.get_batch();
    REQUIRE(a.items.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a.items[i].tweet_id == b.items[i].tweet_id);
    CHECK(a.session_revision == 0);
    CHECK(a.cycle == 0);

    const auto r = service.submit_labels(answer(a));
    CHECK(r.accepted == 3);
    CHECK(r.session_revision == 1);
    CHECK(r.cycle == 1);
    CHECK(service.revision() == 1);
    CHECK(service.get_status().metrics_history.size() == 2);
    // New audit events reach the sink once each.
    CHECK(sunk.size() == service.snapshot()->audit().size() - f.session().audit().size());
    CHECK(sunk.back().type == "cycle_complete");
}

TEST_CASE("stale revisions conflict and invalid entries are rejected") {
    const Fixture f;
    LabelService service(f.session());
    const auto batch = service.get_batch();
    auto stale = answer(batch);
    stale.session_revision = 7;
    CHECK_THROWS_AS(service.submit_labels(stale), ConflictError);

    LabelSubmission mixed = answer(batch);
    mixed.labels.push_back({"not-in-batch", "misinfo", "ann"});
    mixed.labels.push_back({batch.items[0].tweet_id, "misinfo", "ann"});
    mixed.labels[1].label = "perhaps";
    const auto r = service.submit_labels(mixed);
    CHECK(r.accepted == 2);
    CHECK(r.rejected.size() == 3);

    // A submission with nothing valid does not advance the session.
    LabelSubmission none;
    none.session_revision = service.revision();
    none.labels.push_back({"nope", "misinfo", ""});
    const auto before = service.revision();
    const auto empty = service.submit_labels(none);
    CHECK(empty.accepted == 0);
    CHECK(service.revision() == before);
}

TEST_CASE("completed sessions refuse labels") {
    const Fixture f;
    LabelService service(f.session(1));
    service.submit_labels(answer(service.get_batch()));
    CHECK(service.get_status().complete);
    const auto batch = service.get_batch();
    CHECK(batch.complete);
    CHECK(batch.items.empty());
    LabelSubmission late;
    late.session_revision = service.revision();
    CHECK_THROWS_AS(service.submit_labels(late), OutOfRange);
}

TEST_CASE("audit file appends lines") {
    const auto dir = synth::fresh_dir("labelserver_audit");
    AuditFile file(dir / "audit.jsonl");
    const Fixture f;
    const auto session = f.session();
    for (const auto& e : session.audit()) file.append(e);
    CHECK(active::load_audit_log(dir / "audit.jsonl").size() == session.audit().size());
}

TEST_CASE("http round trip") {
    const Fixture f;
    LabelService service(f.session());
    const auto dir = synth::fresh_dir("labelserver_static");
    write_file(dir / "index.html", "<html>ui</html>");
    HttpServer server(service, ServerOptions{"127.0.0.1", 0, dir});
    const int port = server.bind();
    REQUIRE(port > 0);
    std::thread worker([&] { server.serve(); });

    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(60, 0);
    auto res = client.Get("/api/v1/batch");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto batch = json::parse(res->body);
    CHECK(batch.at("items").size() == 3);
    CHECK(batch.at("session_revision") == 0);

    json body{{"session_revision", 0}, {"labels", json::array()}};
    for (const auto& item : batch.at("items"))
        body["labels"].push_back({{"tweet_id", item.at("tweet_id")}, {"label", "not_misinfo"}, {"annotator_id", "w"}});
    res = client.Post("/api/v1/labels", body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body).at("accepted") == 3);

    res = client.Post("/api/v1/labels", body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 409);
    CHECK(json::parse(res->body).at("code") == "stale_revision");

    res = client.Post("/api/v1/labels", "{oops", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);

    res = client.Get("/api/v1/status");
    REQUIRE(res);
    const auto status = json::parse(res->body);
    CHECK(status.at("cycle") == 1);
    CHECK(status.at("metrics_history").size() == 2);

    res = client.Get("/api/v1/metrics.csv");
    REQUIRE(res);
    CHECK(res->body.starts_with("cycle,accuracy"));

    res = client.Get("/index.html");
    REQUIRE(res);
    CHECK(res->body == "<html>ui</html>");

    // Finish the session, then a late submission answers 410.
    const auto last = json::parse(client.Get("/api/v1/batch")->body);
    body = {{"session_revision", last.at("session_revision")}, {"labels", json::array()}};
    for (const auto& item : last.at("items"))
        body["labels"].push_back({{"tweet_id", item.at("tweet_id")}, {"label", "misinfo"}});
    CHECK(client.Post("/api/v1/labels", body.dump(), "application/json")->status == 200);
    body["session_revision"] = service.revision();
    CHECK(client.Post("/api/v1/labels", body.dump(), "application/json")->status == 410);

    server.stop();
    worker.join();
}
