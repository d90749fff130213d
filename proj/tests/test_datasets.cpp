#include <doctest.h>

#include "marshal/datasets.hpp"
#include "test_support.hpp"

using namespace marshal;
using namespace marshal::testing;

namespace {

std::string data_file(const std::string& rel) { return (fs::path(MARSHAL_DATA_DIR) / rel).string(); }

Errc load_error(const std::string& content, LoadOptions opts = {}) {
    try {
        parse_samples(content, "/tmp/bad.jsonl", opts);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected a dataset error");
    return Errc::ConfigError;
}

}  // namespace

TEST_CASE("manifest loading") {
    TempDir dir;
    spit(dir / "img" / "a.jpg", "A");
    spit(dir / "test.jsonl",
         "{\"id\":\"a\",\"text\":\"the pa welcome center is hopping today .\",\"image\":\"img/a.jpg\",\"label\":1}\n"
         "\n"
         "{\"id\":\"b\",\"text\":\"lovely weather\",\"image\":null,\"label\":0}\n"
         "{\"id\":\"c\",\"text\":\"no label here\"}\n");
    const DatasetManifest m = load_samples(dir / "test.jsonl");
    CHECK(m.name == "test");
    REQUIRE(m.samples.size() == 3);
    CHECK(m.samples[0].image->resolved == dir / "img" / "a.jpg");
    CHECK(m.samples[0].gold == Label::Sarcastic);
    CHECK_FALSE(m.samples[1].image.has_value());
    CHECK(m.samples[1].gold == Label::NonSarcastic);
    CHECK_FALSE(m.samples[2].gold.has_value());

    LoadOptions rooted;
    rooted.image_root = dir / "img";
    spit(dir / "other.jsonl", "{\"id\":\"a\",\"text\":\"t\",\"image\":\"a.jpg\",\"label\":1}\n");
    CHECK(load_samples(dir / "other.jsonl", rooted).samples[0].image->resolved == dir / "img" / "a.jpg");
}

TEST_CASE("manifest round-trip") {
    TempDir dir;
    spit(dir / "x.jpg", "X");
    const std::string content =
        "{\"id\":\"1\",\"text\":\"caf\\u00e9 \\\"quoted\\\"\",\"image\":\"x.jpg\",\"label\":1}\n"
        "{\"id\":\"2\",\"text\":\"plain\",\"image\":null,\"label\":null}\n";
    const DatasetManifest a = parse_samples(content, (dir / "m.jsonl").string());
    const std::string once = serialize_samples(a);
    const DatasetManifest b = parse_samples(once, (dir / "m.jsonl").string());
    CHECK(a.samples == b.samples);
    CHECK(serialize_samples(b) == once);
}

TEST_CASE("manifest errors carry the line number") {
    CHECK(load_error("{\"id\":\"a\",\"text\":\"t\"}\nnot json\n") == Errc::MalformedRecord);
    CHECK(load_error("{\"text\":\"t\"}") == Errc::MalformedRecord);
    CHECK(load_error("{\"id\":\"a\"}") == Errc::MalformedRecord);
    CHECK(load_error("{\"id\":\"a\",\"text\":\"  \"}") == Errc::MalformedRecord);
    CHECK(load_error("{\"id\":\"a\",\"text\":\"t\",\"image\":5}") == Errc::MalformedRecord);
    CHECK(load_error("{\"id\":\"a\",\"text\":\"t\"}\n{\"id\":\"a\",\"text\":\"u\"}") == Errc::DuplicateId);
    CHECK(load_error("{\"id\":\"a\",\"text\":\"t\",\"label\":2}") == Errc::InvalidLabel);
    CHECK(load_error("{\"id\":\"a\",\"text\":\"t\",\"label\":\"1\"}") == Errc::InvalidLabel);
    CHECK(load_error("{\"id\":\"a\",\"text\":\"t\",\"image\":\"missing.jpg\"}") == Errc::MissingImageFile);

    LoadOptions lazy;
    lazy.lazy_images = true;
    CHECK(parse_samples("{\"id\":\"a\",\"text\":\"t\",\"image\":\"missing.jpg\"}", "/tmp/x.jsonl", lazy)
              .samples[0]
              .image.has_value());

    try {
        parse_samples("{\"id\":\"a\",\"text\":\"t\"}\n\n{\"id\":\"a\",\"text\":\"u\"}", "/tmp/m.jsonl");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("/tmp/m.jsonl:3:") != std::string::npos);
    }
}

TEST_CASE("split statistics against the reference tables") {
    const SplitExpectation mmsd = load_expectation(data_file("expectations/mmsd.json"));
    const SplitExpectation mmsd2 = load_expectation(data_file("expectations/mmsd2.json"));
    CHECK(mmsd.stats == SplitStats{19816, 2410, 2409, 10560, 14075});
    CHECK(mmsd2.stats == SplitStats{19816, 2410, 2409, 11651, 12980});

    // 10560 sarcastic spread over the three splits.
    const auto train = synthetic_split("mmsd", Split::Train, 19816, 8642);
    const auto val = synthetic_split("mmsd", Split::Validation, 2410, 959);
    const auto test = synthetic_split("mmsd", Split::Test, 2409, 959);
    CHECK_NOTHROW(check_expectation(split_stats(train, val, test), mmsd));

    // The second release's class totals sum to four fewer than its split
    // sizes, so four samples stay unlabeled.
    const auto train2 = synthetic_split("mmsd2", Split::Train, 19816, 9576, 4);
    const auto val2 = synthetic_split("mmsd2", Split::Validation, 2410, 1042);
    const auto test2 = synthetic_split("mmsd2", Split::Test, 2409, 1033);
    CHECK_NOTHROW(check_expectation(split_stats(train2, val2, test2), mmsd2));
}

TEST_CASE("single-field perturbations are reported with both values") {
    const SplitExpectation mmsd = load_expectation(data_file("expectations/mmsd.json"));
    struct Case {
        const char* field;
        SplitStats stats;
    };
    const SplitStats good = mmsd.stats;
    std::vector<Case> cases;
    for (int f = 0; f < 5; ++f) {
        SplitStats s = good;
        std::uint64_t* fields[] = {&s.n_train, &s.n_validation, &s.n_test, &s.n_sarcastic, &s.n_non_sarcastic};
        *fields[f] += 1;
        const char* names[] = {"n_train", "n_validation", "n_test", "n_sarcastic", "n_non_sarcastic"};
        cases.push_back({names[f], s});
    }
    for (const auto& c : cases) {
        CAPTURE(c.field);
        try {
            check_expectation(c.stats, mmsd);
            FAIL("expected ExpectationMismatch");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::ExpectationMismatch);
            const std::string msg = e.what();
            CHECK(msg.find(c.field) != std::string::npos);
            CHECK(msg.find("; ") == std::string::npos);
        }
    }

    SplitStats two = good;
    two.n_test = 2408;
    two.n_sarcastic = 1;
    try {
        check_expectation(two, mmsd);
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("n_test: expected 2409, got 2408") != std::string::npos);
        CHECK(msg.find("n_sarcastic: expected 10560, got 1") != std::string::npos);
    }
}

TEST_CASE("strip_images and truncate") {
    DatasetManifest m;
    m.samples = {sample("a", "x", true, Label::Sarcastic), sample("b", "y", true), sample("c", "z")};
    const DatasetManifest stripped = strip_images(m);
    REQUIRE(stripped.samples.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK_FALSE(stripped.samples[i].image.has_value());
        CHECK(stripped.samples[i].id == m.samples[i].id);
        CHECK(stripped.samples[i].text == m.samples[i].text);
        CHECK(stripped.samples[i].gold == m.samples[i].gold);
    }
    CHECK(truncate(m, 2).samples.size() == 2);
    CHECK(truncate(m, 10).samples.size() == 3);
}

TEST_CASE("split names") {
    CHECK(parse_split("train") == Split::Train);
    CHECK(parse_split("validation") == Split::Validation);
    CHECK(parse_split("test") == Split::Test);
    CHECK_FALSE(parse_split("dev").has_value());
}
