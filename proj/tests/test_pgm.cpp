#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "survwalk/error.hpp"
#include "survwalk/pgm.hpp"

using namespace survwalk;

namespace {

struct ParsedPgm {
    size_t width = 0;
    size_t height = 0;
    std::vector<unsigned char> pixels;
};

ParsedPgm parse_pgm(const std::string& path) {
    const std::string raw = testutil::slurp(path);
    ParsedPgm p;
    REQUIRE(raw.rfind("P5\n", 0) == 0);
    size_t nl2 = raw.find('\n', 3);
    REQUIRE(nl2 != std::string::npos);
    REQUIRE(std::sscanf(raw.substr(3, nl2 - 3).c_str(), "%zu %zu", &p.width, &p.height) == 2);
    size_t nl3 = raw.find('\n', nl2 + 1);
    REQUIRE(nl3 != std::string::npos);
    CHECK(raw.substr(nl2 + 1, nl3 - nl2 - 1) == "255");
    p.pixels.assign(raw.begin() + static_cast<long>(nl3) + 1, raw.end());
    REQUIRE(p.pixels.size() == p.width * p.height);
    return p;
}

}  // namespace

TEST_CASE("write_pgm: exact bytes for a 3x2 image") {
    testutil::TempDir dir("pgm_small");
    const std::string path = dir.file("small.pgm");
    // quantization is floor(v * 255 + 0.5)
    write_pgm({0.0, 0.5, 1.0, 0.002, 0.1, 0.98}, 2, 3, path);

    std::string expected = "P5\n3 2\n255\n";
    for (unsigned char b : {0, 128, 255, 1, 26, 250}) expected.push_back(static_cast<char>(b));
    CHECK(testutil::slurp(path) == expected);
}

TEST_CASE("write_pgm: out-of-range intensities clamp to the byte range") {
    testutil::TempDir dir("pgm_clamp");
    const std::string path = dir.file("clamp.pgm");
    write_pgm({-0.3, 1.7}, 1, 2, path);
    const ParsedPgm p = parse_pgm(path);
    CHECK(p.pixels == std::vector<unsigned char>{0, 255});
}

TEST_CASE("write_pgm: rejects bad geometry and unwritable paths") {
    CHECK_THROWS_AS(write_pgm({0.5}, 1, 2, "unused.pgm"), Error);
    CHECK_THROWS_AS(write_pgm({}, 0, 0, "unused.pgm"), Error);
    try {
        write_pgm({0.5}, 1, 1, "/nonexistent_dir_svhw/x.pgm");
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::io);
    }
}

TEST_CASE("emit_image_grid: two frames side by side with a white separator") {
    const size_t s = 16;
    std::vector<double> a(s * s), b(s * s);
    for (size_t i = 0; i < s * s; ++i) {
        a[i] = static_cast<double>(i % 7) / 10.0;
        b[i] = static_cast<double>(i % 11) / 20.0;
    }
    testutil::TempDir dir("pgm_grid2");
    const std::string path = dir.file("grid.pgm");
    emit_image_grid({a, b}, s, s, 2, path);

    const ParsedPgm p = parse_pgm(path);
    CHECK(p.width == 2 * s + 1);
    CHECK(p.height == s);
    for (size_t r = 0; r < s; ++r) {
        CHECK(p.pixels[r * p.width + s] == 255);  // separator column
        for (size_t c = 0; c < s; ++c) {
            const auto qa = static_cast<unsigned char>(a[r * s + c] * 255.0 + 0.5);
            const auto qb = static_cast<unsigned char>(b[r * s + c] * 255.0 + 0.5);
            CHECK(p.pixels[r * p.width + c] == qa);
            CHECK(p.pixels[r * p.width + s + 1 + c] == qb);
        }
    }
}

TEST_CASE("emit_image_grid: wrapping leaves the unused trailing cell black") {
    const size_t s = 4;
    const std::vector<double> bright(s * s, 1.0);
    testutil::TempDir dir("pgm_grid3");
    const std::string path = dir.file("grid.pgm");
    emit_image_grid({bright, bright, bright}, s, s, 2, path);

    const ParsedPgm p = parse_pgm(path);
    CHECK(p.width == 2 * s + 1);
    CHECK(p.height == 2 * s + 1);

    // separator row and column stay white
    for (size_t c = 0; c < p.width; ++c) CHECK(p.pixels[s * p.width + c] == 255);
    for (size_t r = 0; r < p.height; ++r) CHECK(p.pixels[r * p.width + s] == 255);

    // three filled cells are all-bright
    auto cell = [&](size_t cr, size_t cc, size_t r, size_t c) {
        return p.pixels[(cr * (s + 1) + r) * p.width + cc * (s + 1) + c];
    };
    for (size_t r = 0; r < s; ++r)
        for (size_t c = 0; c < s; ++c) {
            CHECK(cell(0, 0, r, c) == 255);
            CHECK(cell(0, 1, r, c) == 255);
            CHECK(cell(1, 0, r, c) == 255);
            CHECK(cell(1, 1, r, c) == 0);  // the empty slot
        }
}

TEST_CASE("emit_image_grid: a single frame needs no separators") {
    const size_t s = 3;
    std::vector<double> f(s * s, 0.5);
    testutil::TempDir dir("pgm_grid1");
    const std::string path = dir.file("one.pgm");
    emit_image_grid({f}, s, s, 5, path);
    const ParsedPgm p = parse_pgm(path);
    CHECK(p.width == s);
    CHECK(p.height == s);
    for (unsigned char b : p.pixels) CHECK(b == 128);
}

TEST_CASE("emit_image_grid: invalid inputs") {
    const std::vector<double> f(9, 0.0);
    CHECK_THROWS_AS(emit_image_grid({}, 3, 3, 2, "unused.pgm"), Error);
    CHECK_THROWS_AS(emit_image_grid({f}, 3, 3, 0, "unused.pgm"), Error);
    CHECK_THROWS_AS(emit_image_grid({f}, 0, 3, 1, "unused.pgm"), Error);
    try {
        emit_image_grid({f, {0.0}}, 3, 3, 2, "unused.pgm");
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("frame 1 has 1 pixels") != std::string::npos);
    }
}
