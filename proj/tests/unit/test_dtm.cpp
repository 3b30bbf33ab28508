#include "infodemic/dtm.hpp"
#include "infodemic/error.hpp"

#include "../support/synthetic.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace infodemic;
using namespace infodemic::dtm;

namespace {

using Matrix = std::vector<std::vector<double>>;

Matrix inverse(Matrix a) {
    const std::size_t n = a.size();
    Matrix inv(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
        std::swap(a[c], a[p]);
        std::swap(inv[c], inv[p]);
        const double d = a[c][c];
        for (std::size_t j = 0; j < n; ++j) a[c][j] /= d, inv[c][j] /= d;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = a[r][c];
            for (std::size_t j = 0; j < n; ++j) a[r][j] -= f * a[c][j], inv[r][j] -= f * inv[c][j];
        }
    }
    return inv;
}

double log_det_spd(Matrix a) {
    // Cholesky
    const std::size_t n = a.size();
    double ld = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double s = a[j][j];
        for (std::size_t k = 0; k < j; ++k) s -= a[j][k] * a[j][k];
        const double l = std::sqrt(s);
        a[j][j] = l;
        ld += 2.0 * std::log(l);
        for (std::size_t i = j + 1; i < n; ++i) {
            double t = a[i][j];
            for (std::size_t k = 0; k < j; ++k) t -= a[i][k] * a[j][k];
            a[i][j] = t / l;
        }
    }
    return ld;
}

} // namespace

TEST_CASE("kalman smoother matches the dense Gaussian posterior") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t T = 1 + rand_below(rng, 8);
        const double chain = 0.01 + rand_unit(rng), obs = 0.1 + rand_unit(rng), init = 0.5 + 5 * rand_unit(rng);
        std::vector<double> y(T);
        for (auto& v : y) v = 4.0 * rand_unit(rng) - 2.0;

        Matrix prior(T, std::vector<double>(T));
        for (std::size_t i = 0; i < T; ++i)
            for (std::size_t j = 0; j < T; ++j) prior[i][j] = init + chain * static_cast<double>(std::min(i, j));
        auto precision = inverse(prior);
        for (std::size_t i = 0; i < T; ++i) precision[i][i] += 1.0 / obs;
        const auto post = inverse(precision);

        auto marginal = prior;
        for (std::size_t i = 0; i < T; ++i) marginal[i][i] += obs;
        const auto marginal_inv = inverse(marginal);
        double quad = 0.0;
        for (std::size_t i = 0; i < T; ++i)
            for (std::size_t j = 0; j < T; ++j) quad += y[i] * marginal_inv[i][j] * y[j];
        const double log_marginal =
            -0.5 * (static_cast<double>(T) * std::log(2 * std::numbers::pi) + log_det_spd(marginal) + quad);

        const auto k = kalman_smooth(y, chain, obs, init);
        REQUIRE(k.mean.size() == T);
        for (std::size_t i = 0; i < T; ++i) {
            double m = 0.0;
            for (std::size_t j = 0; j < T; ++j) m += post[i][j] * y[j] / obs;
            CHECK(k.mean[i] == doctest::Approx(m).epsilon(1e-9));
            CHECK(k.variance[i] == doctest::Approx(post[i][i]).epsilon(1e-9));
        }
        CHECK(k.log_marginal == doctest::Approx(log_marginal).epsilon(1e-9));
    }
}

TEST_CASE("slicing a corpus") {
    std::vector<corpus::Tweet> tweets{synth::tweet("a", "alpha beta", 0), synth::tweet("b", "beta gamma", 8),
                                      synth::tweet("c", "gamma", 20)};
    std::vector<std::vector<std::string>> docs;
    for (const auto& t : tweets) docs.push_back(textfeat::tokenize(t.text, {}));
    const auto vocab = textfeat::build_vocabulary(docs, 0.0, false);
    const auto sc = slice_corpus(tweets, {}, vocab, synth::day(0));
    CHECK(sc.slice_count() == 3);
    CHECK(sc.doc_count() == 3);
    CHECK(sc.vocab_size == vocab.size());
    CHECK(sc.slices[1][0].id == "b");
    CHECK(sc.slices[1][0].length() == 2);
}

TEST_CASE("fitted models are well formed and deterministic") {
    const auto drift = synth::planted_drift(2, 3, 60, 150, 25, 4);
    DtmConfig config;
    config.em_max_passes = 5;
    const auto a = fit_dtm(drift.corpus, config);
    const auto b = fit_dtm(drift.corpus, config);
    CHECK(a.to_json() == b.to_json());
    CHECK(a.n_topics() == 2);
    CHECK(a.slice_count() == 3);
    for (std::size_t t = 0; t < 3; ++t)
        for (const auto& theta : a.doc_topic()[t]) {
            double s = 0.0;
            for (const double x : theta) s += x;
            CHECK(s == doctest::Approx(1.0));
        }
    const auto top = a.top_words(0, 1, 5);
    REQUIRE(top.size() == 5);
    for (std::size_t i = 1; i < top.size(); ++i) CHECK(top[i - 1].probability >= top[i].probability);
    CHECK_THROWS_AS(a.top_words(5, 0, 3), OutOfRange);
    CHECK(a.word_trajectory(0, 3).size() == 3);

    const auto back = DtmModel::from_json(a.to_json());
    CHECK(back.to_json() == a.to_json());

    // Input order inside a slice does not matter.
    auto shuffled = drift.corpus;
    Rng rng(3);
    for (auto& s : shuffled.slices) shuffle(std::span(s), rng);
    const auto c = fit_dtm(shuffled, config);
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t k = 0; k < 2; ++k) CHECK(c.word_probs(t, k) == a.word_probs(t, k));
    CHECK(c.elbo_trace() == a.elbo_trace());

    const auto theta = infer_doc_topics(a, 1, drift.corpus.slices[1][0]);
    CHECK(theta.size() == 2);
    CHECK(theta[0] + theta[1] == doctest::Approx(1.0));
}

TEST_CASE("lda trace never decreases") {
    const auto drift = synth::planted_drift(3, 1, 90, 120, 30, 8);
    DtmConfig config;
    config.n_topics = 3;
    const auto lda = fit_lda(drift.corpus.slices[0], 90, config);
    for (std::size_t i = 1; i < lda.elbo_trace.size(); ++i)
        CHECK(lda.elbo_trace[i] >= lda.elbo_trace[i - 1] - 1e-6);
    for (std::size_t k = 0; k < 3; ++k) {
        double s = 0.0;
        for (std::size_t w = 0; w < 90; ++w) s += std::exp(lda.log_prob(k, w));
        CHECK(s == doctest::Approx(1.0));
    }
}

TEST_CASE("config and corpus validation") {
    DtmConfig bad;
    bad.n_topics = 0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad = {};
    bad.chain_variance = -1;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    SlicedCorpus empty_slice;
    empty_slice.vocab_size = 5;
    empty_slice.slices = {{Document{"a", {{0, 2}}}}, {}};
    CHECK_THROWS_AS(fit_dtm(empty_slice, DtmConfig{}), InvalidArgument);
}

TEST_CASE("topic alignment") {
    const std::vector<std::vector<double>> ref{{0.7, 0.2, 0.1}, {0.1, 0.2, 0.7}, {0.3, 0.4, 0.3}};
    const std::vector<std::vector<double>> fitted{ref[2], ref[0], ref[1]};
    CHECK(align_topics(fitted, ref) == std::vector<std::size_t>{2, 0, 1});
    CHECK(symmetric_kl(ref[0], ref[0]) == doctest::Approx(0.0));
    CHECK(symmetric_kl(ref[0], ref[1]) == doctest::Approx(symmetric_kl(ref[1], ref[0])));
    CHECK(symmetric_kl(ref[0], ref[1]) > 0.0);
}

TEST_CASE("model outputs write") {
    const auto drift = synth::planted_drift(2, 2, 30, 60, 20, 1);
    std::vector<std::string> terms;
    for (int i = 0; i < 30; ++i) terms.push_back(fmt::format("w{:02d}", i));
    const textfeat::Vocabulary vocab(terms, std::vector<std::uint32_t>(30, 1), 60, false);
    DtmConfig config;
    config.em_max_passes = 3;
    const auto m = fit_dtm(drift.corpus, config);
    const auto dir = synth::fresh_dir("dtm_out");
    write_topics_csv(m, vocab, 5, dir / "topics.csv");
    CHECK(read_csv(dir / "topics.csv").rows.size() == 2 * 2 * 5);
    const auto mass = slice_topic_mass(m, drift.corpus);
    CHECK(mass.token_share.size() == 2);
    CHECK(mass.token_share[0][0] + mass.token_share[0][1] == doctest::Approx(1.0));
}
