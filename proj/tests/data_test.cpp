// SPDX-License-Identifier: Apache-2.0
#include "lstnet/data.hpp"

#include "lstnet/errors.hpp"
#include "support/test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace lstnet;

namespace {

std::filesystem::path write_temp(const std::string& name,
                                 const std::string& content) {
    auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream f(path, std::ios::trunc);
    f << content;
    return path;
}

} // namespace

TEST_CASE("load_dataset") {
    SUBCASE("simple comma file") {
        auto p = write_temp("lstnet_simple.csv", "1,2\n3,4\n5,6\n");
        auto ds = load_dataset(p);
        CHECK(ds.rows() == 3);
        CHECK(ds.vars() == 2);
        CHECK(ds.value(0, 0) == 1.0);
        CHECK(ds.value(2, 1) == 6.0);
        CHECK(ds.name() == "lstnet_simple");
    }
    SUBCASE("tab delimiter") {
        auto p = write_temp("lstnet_tabs.tsv", "1\t2\n3\t4\n");
        auto ds = load_dataset(p, '\t');
        CHECK(ds.rows() == 2);
        CHECK(ds.vars() == 2);
    }
    SUBCASE("ragged row names the row") {
        auto p = write_temp("lstnet_ragged.csv", "1,2\n3\n");
        CHECK_THROWS_WITH_AS(load_dataset(p),
                             doctest::Contains("row 2"), DataError);
    }
    SUBCASE("unparseable field names row and column") {
        auto p = write_temp("lstnet_badfield.csv", "1,2\n3,abc\n");
        try {
            load_dataset(p);
            FAIL("expected DataError");
        } catch (const DataError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("row 2") != std::string::npos);
            CHECK(msg.find("column 2") != std::string::npos);
            CHECK(msg.find("abc") != std::string::npos);
        }
    }
    SUBCASE("empty file") {
        auto p = write_temp("lstnet_empty.csv", "");
        CHECK_THROWS_AS(load_dataset(p), DataError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_dataset("/nonexistent/nope.csv"), DataError);
    }
}

TEST_CASE("normalization") {
    SplitSpec split; // 0.6/0.2/0.2
    SUBCASE("per-variable max and round trip") {
        // 5 rows: train = first 3 rows
        TimeSeriesDataset ds(5, 2,
                             {2.0, 0.0, -4.0, 0.0, 1.0, 0.0, 8.0, 0.0, -16.0, 0.0});
        ds.normalize(NormalizeMode::per_variable_max, split);
        // var 0 train max |.| = 4; var 1 all zeros -> factor 1
        CHECK(ds.scale()[0] == 4.0);
        CHECK(ds.scale()[1] == 1.0);
        CHECK(ds.value(0, 0) == 0.5);
        CHECK(ds.value(1, 0) == -1.0);
        CHECK(ds.value(3, 0) == 2.0); // test rows can exceed 1
        CHECK(ds.raw_value(3, 0) == 8.0);
        ds.denormalize();
        CHECK(ds.value(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(ds.value(4, 0) == doctest::Approx(-16.0).epsilon(1e-12));
    }
    SUBCASE("factors come from the training split only") {
        std::vector<double> vals(10, 0.0);
        for (int t = 0; t < 10; ++t) vals[t] = t < 6 ? 2.0 - (t % 2) : 100.0;
        TimeSeriesDataset ds(10, 1, vals);
        ds.normalize(NormalizeMode::per_variable_max, split);
        CHECK(ds.scale()[0] == 2.0);
    }
    SUBCASE("normalized training max abs is exactly 1") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> dist(-5.0, 5.0);
        std::vector<double> vals(40 * 3);
        for (auto& v : vals) v = dist(rng);
        TimeSeriesDataset ds(40, 3, vals);
        ds.normalize(NormalizeMode::per_variable_max, split);
        const std::size_t train_end = split.train_end(40);
        for (std::size_t i = 0; i < 3; ++i) {
            double mx = 0.0;
            for (std::size_t t = 0; t < train_end; ++t) {
                mx = std::max(mx, std::fabs(ds.value(t, i)));
            }
            CHECK(mx == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("double normalization is rejected") {
        TimeSeriesDataset ds(5, 1, {1, 2, 3, 4, 5});
        ds.normalize(NormalizeMode::per_variable_max, split);
        CHECK_THROWS_AS(ds.normalize(NormalizeMode::per_variable_max, split),
                        DataError);
    }
}

TEST_CASE("window anchors") {
    SplitSpec split;
    SUBCASE("T=10 q=3 h=2 over the whole series gives 6 anchors") {
        auto anchors = window_anchors(10, 3, 2, split, DatasetPart::all);
        REQUIRE(anchors.size() == 6);
        CHECK(anchors.front() == 2); // window rows 0..2, target 4
        CHECK(anchors.back() == 7);  // window rows 5..7, target 9
    }
    SUBCASE("q = T yields an explicit empty result") {
        auto anchors = window_anchors(10, 10, 1, split, DatasetPart::all);
        CHECK(anchors.empty());
    }
    SUBCASE("count formula matches brute-force enumeration") {
        std::mt19937_64 rng(9);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t T =
                std::uniform_int_distribution<std::size_t>(1, 60)(rng);
            const std::size_t q =
                std::uniform_int_distribution<std::size_t>(1, 20)(rng);
            const std::size_t h =
                std::uniform_int_distribution<std::size_t>(1, 10)(rng);
            auto anchors = window_anchors(T, q, h, split, DatasetPart::all);
            std::size_t expected = 0;
            for (std::size_t a = 0; a < T; ++a) {
                if (a + 1 >= q && a + h < T) ++expected;
            }
            CHECK(anchors.size() == expected);
            if (expected > 0) {
                const std::ptrdiff_t formula = static_cast<std::ptrdiff_t>(T) -
                                               static_cast<std::ptrdiff_t>(q) -
                                               static_cast<std::ptrdiff_t>(h) + 1;
                CHECK(anchors.size() == static_cast<std::size_t>(formula));
            }
        }
    }
    SUBCASE("split targets partition and training never leaks") {
        const std::size_t T = 50, q = 5, h = 3;
        auto train = window_anchors(T, q, h, split, DatasetPart::train);
        auto valid = window_anchors(T, q, h, split, DatasetPart::valid);
        auto test = window_anchors(T, q, h, split, DatasetPart::test);
        const std::size_t train_end = split.train_end(T);
        const std::size_t valid_end = split.valid_end(T);
        for (auto a : train) CHECK(a + h < train_end);
        for (auto a : valid) {
            CHECK(a + h >= train_end);
            CHECK(a + h < valid_end);
        }
        for (auto a : test) CHECK(a + h >= valid_end);
        // every admissible target index is covered exactly once across parts
        std::vector<int> seen(T, 0);
        for (auto a : train) seen[a + h]++;
        for (auto a : valid) seen[a + h]++;
        for (auto a : test) seen[a + h]++;
        for (std::size_t t = q - 1 + h; t < T; ++t) CHECK(seen[t] == 1);
    }
    SUBCASE("valid windows reach back into train rows for context") {
        const std::size_t T = 50, q = 10, h = 1;
        auto valid = window_anchors(T, q, h, split, DatasetPart::valid);
        REQUIRE_FALSE(valid.empty());
        CHECK(valid.front() + 1 - q < split.train_end(T));
    }
}

TEST_CASE("materialize_window and make_batch agree") {
    std::vector<double> vals;
    for (int t = 0; t < 12; ++t) {
        vals.push_back(t);
        vals.push_back(10.0 * t);
    }
    TimeSeriesDataset ds(12, 2, vals);
    auto s = materialize_window(ds, 4, 3, 2);
    CHECK(s.input[0 * 2 + 0] == 2.0); // rows 2,3,4
    CHECK(s.input[2 * 2 + 1] == 40.0);
    CHECK(s.target[0] == 6.0);
    CHECK(s.target[1] == 60.0);

    std::vector<std::size_t> anchors{4, 5};
    auto batch = make_batch(ds, anchors, 3, 2);
    CHECK(batch.input_at(0, 0, 0) == 2.0);
    CHECK(batch.input_at(1, 2, 1) == 50.0);
    CHECK(batch.targets[0 * 2 + 0] == 6.0);
    CHECK(batch.targets[1 * 2 + 1] == 70.0);
}

TEST_CASE("autocorrelation") {
    SUBCASE("constant series is degenerate") {
        std::vector<double> c(100, 3.0);
        CHECK_THROWS_AS(autocorrelation(c, 10), DataError);
    }
    SUBCASE("R(0) is exactly 1") {
        std::mt19937_64 rng(1);
        std::vector<double> x(500);
        std::normal_distribution<double> dist(0, 1);
        for (auto& v : x) v = dist(rng);
        auto r = autocorrelation(x, 20);
        CHECK(r[0] == 1.0);
    }
    SUBCASE("period-24 sinusoid peaks at lag multiples of 24") {
        std::vector<double> x(10000);
        for (std::size_t t = 0; t < x.size(); ++t) {
            x[t] = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 24.0);
        }
        auto r = autocorrelation(x, 100);
        // analytic autocorrelation of a sinusoid is cos(2 pi tau / 24)
        for (std::size_t tau = 1; tau <= 100; ++tau) {
            const double expect =
                std::cos(2.0 * std::numbers::pi * static_cast<double>(tau) / 24.0);
            CHECK(r[tau] == doctest::Approx(expect).epsilon(0.01));
        }
        for (std::size_t peak : {24u, 48u, 72u}) {
            CHECK(r[peak] > r[peak - 2]);
            CHECK(r[peak] > r[peak + 2]);
            CHECK(r[peak] > 0.95);
        }
    }
    SUBCASE("white noise decorrelates") {
        std::mt19937_64 rng(77);
        std::normal_distribution<double> dist(0, 1);
        std::vector<double> x(10000);
        for (auto& v : x) v = dist(rng);
        auto r = autocorrelation(x, 50);
        for (std::size_t tau = 1; tau <= 50; ++tau) {
            CHECK(std::fabs(r[tau]) < 0.05);
        }
    }
    SUBCASE("max_lag must be below the length") {
        std::vector<double> x{1.0, 2.0};
        CHECK_THROWS_AS(autocorrelation(x, 2), DataError);
    }
}

TEST_CASE("scale-shift generator") {
    SUBCASE("nonpositive period is rejected") {
        CHECK_THROWS_AS(generate_scale_shift_ar(2, 0, 1.0, 100, 1), ConfigError);
    }
    SUBCASE("seeded runs are bitwise identical") {
        auto a = generate_scale_shift_ar(3, 50, 0.5, 400, 99);
        auto b = generate_scale_shift_ar(3, 50, 0.5, 400, 99);
        CHECK(testutil::bitwise_equal(a.values, b.values));
        CHECK(testutil::bitwise_equal(a.weights, b.weights));
    }
    SUBCASE("forced zero weights give pure stepped noise") {
        const std::size_t period = 100, blocks = 6;
        auto s = generate_scale_shift_ar(2, period, 1.0, period * blocks, 7,
                                         std::vector<double>{0.0, 0.0});
        REQUIRE(s.values.size() == period * blocks);
        for (std::size_t b = 0; b < blocks; ++b) {
            double mean = 0.0;
            for (std::size_t t = 0; t < period; ++t) {
                mean += s.values[b * period + t];
            }
            mean /= static_cast<double>(period);
            // block means are mu0*b with sd 1/sqrt(100) = 0.1; 3 sigma band
            CHECK(std::fabs(mean - static_cast<double>(b)) < 0.3);
        }
    }
    SUBCASE("no drift when mu0 = 0") {
        const std::size_t period = 200;
        auto s = generate_scale_shift_ar(2, period, 0.0, period * 4, 3,
                                         std::vector<double>{0.3, -0.2});
        std::vector<double> means(4, 0.0);
        for (std::size_t b = 0; b < 4; ++b) {
            for (std::size_t t = 0; t < period; ++t) {
                means[b] += s.values[b * period + t];
            }
            means[b] /= static_cast<double>(period);
        }
        // stationary AR(2) with these weights has mean 0 and sd well under 2
        for (double m : means) CHECK(std::fabs(m) < 0.5);
    }
    SUBCASE("generating weights are returned for oracle checks") {
        auto s = generate_scale_shift_ar(4, 100, 0.0, 500, 11);
        CHECK(s.weights.size() == 4);
    }
}
