#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "survwalk/coxhead.hpp"
#include "survwalk/error.hpp"
#include "survwalk/evalkit.hpp"
#include "survwalk/model.hpp"
#include "survwalk/rng.hpp"

using namespace survwalk;

namespace {

// A deliberately tiny row: only the fields a given test reads are meaningful.
EmbeddingRow row(size_t id, double risk, int class_label) {
    EmbeddingRow r;
    r.id = id;
    r.mu = {risk};
    r.sigma = {1.0};
    r.risk = risk;
    r.class_label = class_label;
    return r;
}

SurvivalDataset tiny_dataset() {
    SimulationConfig sim;
    sim.n_classes = 4;
    sim.samples_per_class = 8;
    sim.image_size = 4;
    sim.hazard_slope = 1.0;
    sim.censoring_fraction = 0.2;
    sim.seed = 31;
    return simulate(sim);
}

RunConfig tiny_run() {
    RunConfig cfg;
    cfg.latent_dim = 2;
    cfg.image_size = 4;
    cfg.encoder_widths = {8};
    cfg.decoder_widths = {8};
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE("c_index: hand-computed values") {
    const std::vector<double> t = {1.0, 2.0, 3.0};
    const std::vector<int> all_events = {1, 1, 1};

    // pairs (0,1), (0,2), (1,2); risks 3>1 and 3>2 concordant, 1<2 not
    CHECK(c_index({3.0, 1.0, 2.0}, t, all_events) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(c_index({3.0, 2.0, 1.0}, t, all_events) == 1.0);
    CHECK(c_index({1.0, 2.0, 3.0}, t, all_events) == 0.0);

    SUBCASE("risk ties earn half credit") {
        // (0,1) tied -> 0.5, the other two concordant
        CHECK(c_index({2.0, 2.0, 1.0}, t, all_events) ==
              doctest::Approx(2.5 / 3.0).epsilon(1e-15));
    }
    SUBCASE("censored subjects only ever appear as the later member") {
        // subject 0 censored: pair (0,1) is dropped, pair (1,2) survives
        CHECK(c_index({1.0, 3.0, 2.0}, t, {0, 1, 1}) == 1.0);
        // only the last subject has an event and nobody outlives it
        CHECK_THROWS_AS(c_index({1.0, 2.0, 3.0}, t, {0, 0, 1}), Error);
    }
    SUBCASE("tied times are not comparable") {
        CHECK_THROWS_AS(c_index({1.0, 2.0}, {5.0, 5.0}, {1, 1}), Error);
    }
    SUBCASE("length mismatch") {
        CHECK_THROWS_AS(c_index({1.0}, {1.0, 2.0}, {1, 1}), Error);
    }
}

TEST_CASE("c_index is invariant under strictly monotone transforms of the risk") {
    Rng rng(17, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const size_t n = 3 + rng.below(30);
        std::vector<double> risks(n), times(n);
        std::vector<int> events(n);
        bool any_event = false;
        for (size_t i = 0; i < n; ++i) {
            risks[i] = rng.uniform(-2.0, 2.0);
            times[i] = 1.0 + rng.below(6);  // coarse grid: many tied times
            events[i] = rng.uniform() < 0.7 ? 1 : 0;
            any_event = any_event || events[i] == 1;
        }
        if (!any_event) events[0] = 1;
        std::vector<double> warped(n);
        for (size_t i = 0; i < n; ++i) warped[i] = std::exp(risks[i]) + 5.0;
        double base;
        try {
            base = c_index(risks, times, events);
        } catch (const Error&) {
            continue;  // no comparable pairs in this draw
        }
        CHECK(c_index(warped, times, events) == base);
    }
}

TEST_CASE("spearman: hand values, ties, and errors") {
    const std::vector<double> a = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(spearman(a, a) == doctest::Approx(1.0).epsilon(1e-15));

    std::vector<double> rev(a.rbegin(), a.rend());
    CHECK(spearman(a, rev) == doctest::Approx(-1.0).epsilon(1e-15));

    SUBCASE("swapping two adjacent values costs 12/990") {
        std::vector<double> b = a;
        std::swap(b[3], b[4]);
        CHECK(spearman(a, b) == doctest::Approx(1.0 - 12.0 / 990.0).epsilon(1e-12));
    }
    SUBCASE("ties get average ranks") {
        // ranks (1.5, 1.5, 3) vs (1, 2, 3) -> 1.5/sqrt(1.5*2) = sqrt(3)/2
        CHECK(spearman({1.0, 1.0, 2.0}, {1.0, 2.0, 3.0}) ==
              doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-12));
        // tie structure respected perfectly in both -> exactly 1
        CHECK(spearman({1.0, 2.0, 2.0, 3.0}, {10.0, 20.0, 20.0, 30.0}) ==
              doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("rank correlation ignores monotone warping") {
        Rng rng(3, 0);
        std::vector<double> x(25), y(25);
        for (size_t i = 0; i < x.size(); ++i) {
            x[i] = rng.uniform(-3.0, 3.0);
            y[i] = rng.uniform(-3.0, 3.0);
        }
        std::vector<double> wx(x.size());
        for (size_t i = 0; i < x.size(); ++i) wx[i] = std::atan(x[i]);
        CHECK(spearman(wx, y) == doctest::Approx(spearman(x, y)).epsilon(1e-12));
    }
    SUBCASE("degenerate input") {
        CHECK_THROWS_AS(spearman({1.0, 2.0}, {1.0}), Error);
        CHECK_THROWS_AS(spearman({1.0}, {1.0}), Error);
        CHECK_THROWS_AS(spearman({2.0, 2.0, 2.0}, {1.0, 2.0, 3.0}), Error);
    }
}

TEST_CASE("hazard_rank_agreement: spearman of class label against per-class mean risk") {
    SUBCASE("perfect ordering") {
        EmbeddingTable t;
        t.rows = {row(0, 0.1, 0), row(1, 0.3, 0), row(2, 1.0, 1),
                  row(3, 1.2, 1), row(4, 2.5, 2), row(5, 2.7, 2)};
        CHECK(hazard_rank_agreement(t) == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("reversed ordering") {
        EmbeddingTable t;
        t.rows = {row(0, 3.0, 0), row(1, 2.0, 1), row(2, 1.0, 2)};
        CHECK(hazard_rank_agreement(t) == doctest::Approx(-1.0).epsilon(1e-15));
    }
    SUBCASE("one inversion among three classes") {
        // class means 0.1, 0.5, 0.3 -> rank pattern (1,3,2) -> rho = 0.5
        EmbeddingTable t;
        t.rows = {row(0, 0.1, 0), row(1, 0.4, 1), row(2, 0.6, 1), row(3, 0.3, 2)};
        CHECK(hazard_rank_agreement(t) == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("missing labels and single-class tables are rejected") {
        EmbeddingTable missing;
        missing.rows = {row(0, 1.0, 0), row(1, 2.0, -1)};
        CHECK_THROWS_AS(hazard_rank_agreement(missing), Error);

        EmbeddingTable single;
        single.rows = {row(0, 1.0, 3), row(1, 2.0, 3)};
        try {
            hazard_rank_agreement(single);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("single class") != std::string::npos);
        }
    }
}

TEST_CASE("symmetric_eig: hand 2x2 and random reconstruction") {
    SUBCASE("[[2,1],[1,2]] has eigenvalues 3 and 1") {
        Tensor<double> m({2, 2}, {2.0, 1.0, 1.0, 2.0});
        std::vector<double> vals;
        Tensor<double> vecs;
        symmetric_eig(m, vals, vecs);
        REQUIRE(vals.size() == 2);
        CHECK(vals[0] == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(vals[1] == doctest::Approx(1.0).epsilon(1e-12));
        // A v = lambda v for each column
        for (size_t c = 0; c < 2; ++c) {
            for (size_t i = 0; i < 2; ++i) {
                double av = 0.0;
                for (size_t j = 0; j < 2; ++j) av += m.at(i, j) * vecs.at(j, c);
                CHECK(av == doctest::Approx(vals[c] * vecs.at(i, c)).epsilon(1e-10));
            }
        }
    }
    SUBCASE("random symmetric 5x5: orthonormal V, descending values, A = V diag V^T") {
        Rng rng(8, 0);
        const size_t d = 5;
        Tensor<double> m = Tensor<double>::zeros({d, d});
        for (size_t i = 0; i < d; ++i)
            for (size_t j = i; j < d; ++j) {
                m.at(i, j) = rng.uniform(-2.0, 2.0);
                m.at(j, i) = m.at(i, j);
            }
        std::vector<double> vals;
        Tensor<double> vecs;
        symmetric_eig(m, vals, vecs);
        for (size_t k = 1; k < d; ++k) CHECK(vals[k - 1] >= vals[k]);
        for (size_t a = 0; a < d; ++a)
            for (size_t b = 0; b < d; ++b) {
                double dot = 0.0;
                for (size_t i = 0; i < d; ++i) dot += vecs.at(i, a) * vecs.at(i, b);
                CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-10));
            }
        for (size_t i = 0; i < d; ++i)
            for (size_t j = 0; j < d; ++j) {
                double acc = 0.0;
                for (size_t k = 0; k < d; ++k) acc += vecs.at(i, k) * vals[k] * vecs.at(j, k);
                CHECK(acc == doctest::Approx(m.at(i, j)).epsilon(1e-9));
            }
    }
    SUBCASE("non-square input") {
        Tensor<double> m({2, 3}, std::vector<double>(6, 0.0));
        std::vector<double> vals;
        Tensor<double> vecs;
        CHECK_THROWS_AS(symmetric_eig(m, vals, vecs), Error);
    }
}

TEST_CASE("pca2: axis-aligned cloud is recovered exactly") {
    // four points (+-3, +-1): covariance diag(12, 4/3), components = identity
    Tensor<double> pts({4, 2}, {3.0, 1.0, 3.0, -1.0, -3.0, 1.0, -3.0, -1.0});
    const Pca2 p = pca2(pts);
    REQUIRE(p.eigenvalues.size() == 2);
    CHECK(p.eigenvalues[0] == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(p.eigenvalues[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
    CHECK(p.mean[0] == doctest::Approx(0.0));
    CHECK(p.mean[1] == doctest::Approx(0.0));
    CHECK(p.components.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.components.at(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(p.components.at(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(p.components.at(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
    for (size_t i = 0; i < 4; ++i) {
        CHECK(p.projection.at(i, 0) == doctest::Approx(pts.at(i, 0)).epsilon(1e-12));
        CHECK(p.projection.at(i, 1) == doctest::Approx(pts.at(i, 1)).epsilon(1e-12));
    }
}

TEST_CASE("pca2: rotating the cloud preserves eigenvalues and projections up to sign") {
    Rng rng(12, 0);
    const size_t n = 40, d = 3;
    Tensor<double> pts = Tensor<double>::zeros({n, d});
    for (size_t i = 0; i < n; ++i) {
        // anisotropic scales so the spectrum is well separated
        pts.at(i, 0) = 3.0 * rng.normal();
        pts.at(i, 1) = 1.0 * rng.normal();
        pts.at(i, 2) = 0.2 * rng.normal();
    }
    // fixed rotation: Rz(0.7) composed with Rx(0.3)
    const double c1 = std::cos(0.7), s1 = std::sin(0.7);
    const double c2 = std::cos(0.3), s2 = std::sin(0.3);
    const double R[3][3] = {{c1, -s1, 0.0},
                            {c2 * s1, c2 * c1, -s2},
                            {s2 * s1, s2 * c1, c2}};
    Tensor<double> rotated = Tensor<double>::zeros({n, d});
    for (size_t i = 0; i < n; ++i)
        for (size_t r = 0; r < d; ++r) {
            double acc = 0.0;
            for (size_t c = 0; c < d; ++c) acc += R[r][c] * pts.at(i, c);
            rotated.at(i, r) = acc;
        }

    const Pca2 a = pca2(pts);
    const Pca2 b = pca2(rotated);
    for (size_t k = 0; k < d; ++k) {
        CHECK(b.eigenvalues[k] == doctest::Approx(a.eigenvalues[k]).epsilon(1e-9));
    }
    for (size_t c = 0; c < 2; ++c) {
        double same = 0.0, flipped = 0.0;
        for (size_t i = 0; i < n; ++i) {
            same = std::max(same, std::abs(b.projection.at(i, c) - a.projection.at(i, c)));
            flipped = std::max(flipped, std::abs(b.projection.at(i, c) + a.projection.at(i, c)));
        }
        CHECK(std::min(same, flipped) < 1e-8);
    }
    // sign convention: each component's largest-|.| loading is positive
    for (size_t c = 0; c < 2; ++c) {
        size_t arg = 0;
        for (size_t i = 1; i < d; ++i) {
            if (std::abs(b.components.at(i, c)) > std::abs(b.components.at(arg, c))) arg = i;
        }
        CHECK(b.components.at(arg, c) > 0.0);
    }
}

TEST_CASE("pca2: degenerate inputs are rejected") {
    CHECK_THROWS_AS(pca2(Tensor<double>::zeros({5})), Error);            // rank 1
    CHECK_THROWS_AS(pca2(Tensor<double>::zeros({1, 3})), Error);         // one point
    CHECK_THROWS_AS(pca2(Tensor<double>::zeros({4, 1})), Error);         // one dimension
    CHECK_THROWS_AS(pca2(Tensor<double>::full({6, 3}, 2.0)), Error);     // zero variance
}

TEST_CASE("embed_dataset: one row per record with risk = psi . mu") {
    const SurvivalDataset data = tiny_dataset();
    RunConfig cfg = tiny_run();
    cfg.image_size = data.image_rows;
    const ModelState model = init_model(cfg);
    const ModelView view = make_view(model);

    const EmbeddingTable table = embed_dataset(model, data);
    CHECK_NOTHROW(table.validate());
    REQUIRE(table.rows.size() == data.size());
    for (size_t i = 0; i < table.rows.size(); ++i) {
        const EmbeddingRow& r = table.rows[i];
        CHECK(r.id == i);
        REQUIRE(r.mu.size() == cfg.latent_dim);
        REQUIRE(r.sigma.size() == cfg.latent_dim);
        const LatentGaussian xi = view.encode_record(data.records[i]);
        CHECK(r.mu == xi.mu);
        CHECK(r.sigma == xi.sigma());
        CHECK(r.risk == risk_score(xi.mu, view.psi));
        CHECK(r.time == data.records[i].time);
        CHECK(r.event == data.records[i].event);
        CHECK(r.class_label == data.records[i].class_label);
        for (double s : r.sigma) CHECK(s > 0.0);
    }
}

TEST_CASE("embed_dataset: feature width must match the encoder") {
    const SurvivalDataset data = tiny_dataset();  // 4x4 images
    RunConfig cfg = tiny_run();
    cfg.image_size = 8;  // encoder expects 64 inputs
    const ModelState model = init_model(cfg);
    try {
        embed_dataset(model, data);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::invalid_argument);
        CHECK(std::string(e.what()).find("16 features") != std::string::npos);
    }
}

TEST_CASE("EmbeddingTable: validation and CSV emission") {
    EmbeddingTable t;
    EmbeddingRow a = row(0, 0.25, 1);
    a.mu = {0.5, -1.0};
    a.sigma = {1.0, 2.0};
    a.time = 3.5;
    a.event = 1;
    EmbeddingRow b = row(1, -0.75, 2);
    b.mu = {0.0, 0.125};
    b.sigma = {0.5, 0.25};
    b.time = 1.25;
    b.event = 0;
    t.rows = {a, b};

    SUBCASE("csv header and exact value round-trip") {
        testutil::TempDir dir("embed_csv");
        const std::string path = dir.file("embed.csv");
        t.write_csv(path);

        std::ifstream in(path);
        std::string line;
        REQUIRE(std::getline(in, line));
        CHECK(line == "id,mu_1,mu_2,sigma_1,sigma_2,risk,time,event,class");

        REQUIRE(std::getline(in, line));
        CHECK(line == "0,0.5,-1,1,2,0.25,3.5,1,1");
        REQUIRE(std::getline(in, line));
        CHECK(line == "1,0,0.125,0.5,0.25,-0.75,1.25,0,2");
        CHECK_FALSE(std::getline(in, line));
    }
    SUBCASE("duplicate ids are rejected") {
        t.rows[1].id = 0;
        CHECK_THROWS_AS(t.validate(), Error);
        testutil::TempDir dir("embed_dup");
        CHECK_THROWS_AS(t.write_csv(dir.file("x.csv")), Error);
    }
    SUBCASE("inconsistent widths are rejected") {
        t.rows[1].mu = {1.0};
        CHECK_THROWS_AS(t.validate(), Error);
    }
    SUBCASE("empty table is rejected") {
        EmbeddingTable empty;
        CHECK_THROWS_AS(empty.validate(), Error);
    }
}

TEST_CASE("evaluate: report agrees with its ingredients") {
    const SurvivalDataset data = tiny_dataset();
    RunConfig cfg = tiny_run();
    cfg.image_size = data.image_rows;
    const ModelState model = init_model(cfg);

    const EvalReport report = evaluate(model, data);
    CHECK(report.c_index >= 0.0);
    CHECK(report.c_index <= 1.0);
    CHECK(report.hazard_rank_agreement >= -1.0);
    CHECK(report.hazard_rank_agreement <= 1.0);
    CHECK(report.mean_reconstruction_nll > 0.0);
    CHECK(std::isfinite(report.mean_reconstruction_nll));

    const EmbeddingTable table = embed_dataset(model, data);
    std::vector<double> risks, times;
    std::vector<int> events;
    for (const EmbeddingRow& r : table.rows) {
        risks.push_back(r.risk);
        times.push_back(r.time);
        events.push_back(r.event);
    }
    CHECK(report.c_index == c_index(risks, times, events));
    CHECK(report.hazard_rank_agreement == hazard_rank_agreement(table));
}
