#include <doctest.h>

#include <atomic>
#include <set>

#include "canonmap/binary_io.hpp"
#include "canonmap/error.hpp"
#include "canonmap/hash.hpp"
#include "canonmap/parallel.hpp"
#include "canonmap/rng.hpp"
#include "oracles.hpp"

using namespace canonmap;

TEST_SUITE("util") {

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex(std::string_view("")) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex(std::string_view("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    oracle::TempDir tmp("hash");
    io::ByteWriter w;
    w.raw(std::string_view("abc"));
    w.write_file(tmp / "f");
    CHECK(sha256_file(tmp / "f") == sha256_hex(std::string_view("abc")));
}

TEST_CASE("rng streams are reproducible") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    CHECK(Rng(42).next() != c.next());
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}

TEST_CASE("rng distributions") {
    Rng r(5);
    double sum = 0, sq = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        sum += x;
        sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.03);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
    std::vector<int> hist(7, 0);
    for (int i = 0; i < 7000; ++i) ++hist[r.below(7)];
    for (int h : hist) CHECK(std::abs(h - 1000) < 150);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("sampling without replacement") {
    Rng r(9);
    const auto s = r.sample_without_replacement(500, 100);
    CHECK(s.size() == 100);
    CHECK(std::set<std::size_t>(s.begin(), s.end()).size() == 100);
    for (auto i : s) CHECK(i < 500);
    CHECK(r.sample_without_replacement(30, 100).size() == 30);
    std::vector<int> v{1, 2, 3, 4, 5};
    r.shuffle(v);
    CHECK(std::multiset<int>(v.begin(), v.end()) == std::multiset<int>{1, 2, 3, 4, 5});
}

TEST_CASE("parallel_for covers every index once and rethrows") {
    for (int workers : {1, 3, 8}) {
        std::vector<std::atomic<int>> hits(101);
        parallel_for(hits.size(), workers, [&](std::size_t i) { hits[i]++; });
        for (auto& h : hits) CHECK(h.load() == 1);
    }
    CHECK_THROWS_AS(parallel_for(10, 4, [](std::size_t i) {
                        if (i == 7) fail(ErrorKind::InvalidArgument, "boom");
                    }),
                    Error);
}

TEST_CASE("byte reader and writer") {
    io::ByteWriter w;
    w.magic("TEST");
    w.u8(7);
    w.u16(0xBEEF);
    w.u32(0xDEADBEEF);
    w.f32(-2.5f);
    w.str("hello");
    const std::vector<float> fs{1.0f, 2.0f};
    w.f32s(fs);
    io::ByteReader r(w.bytes());
    r.expect_magic("TEST");
    CHECK(r.u8() == 7);
    CHECK(r.u16() == 0xBEEF);
    CHECK(r.u32() == 0xDEADBEEF);
    CHECK(r.f32() == -2.5f);
    CHECK(r.str() == "hello");
    std::vector<float> back(2);
    r.f32s(back);
    CHECK(back == fs);
    CHECK(r.remaining() == 0);
    try {
        r.u8();
        FAIL("expected Truncated");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Truncated);
    }
    io::ByteReader bad(w.bytes());
    CHECK_THROWS_AS(bad.expect_magic("NOPE"), Error);
}

TEST_CASE("atomic write leaves no temp file") {
    oracle::TempDir tmp("io");
    io::ByteWriter w;
    w.u32(1);
    w.write_file(tmp / "sub" / "x.bin");
    CHECK(std::filesystem::exists(tmp / "sub" / "x.bin"));
    CHECK_FALSE(std::filesystem::exists(tmp / "sub" / "x.bin.tmp"));
}

}
