#include <catch2/catch_amalgamated.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "segfuse/digest.hpp"
#include "segfuse/io/class_table.hpp"
#include "segfuse/io/file.hpp"
#include "segfuse/io/logits.hpp"
#include "segfuse/io/manifest.hpp"
#include "segfuse/io/png.hpp"
#include "segfuse/io/weights_file.hpp"
#include "segfuse/palette.hpp"
#include "segfuse/rng.hpp"

using namespace segfuse;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("segfuse_test_" + std::to_string(SplitMix64(
                                      std::random_device{}()).next()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void dump(const fs::path& p, std::span<const uint8_t> bytes) {
    std::ofstream f(p, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

} // namespace

TEST_CASE("label png round trip") {
    TempDir tmp;
    const ClassTable table = default_class_table("cityscapes19");
    SplitMix64 rng(51);
    LabelMap lbl(17, 9);
    for (auto& v : lbl.values())
        v = static_cast<uint8_t>(rng.uniform_below(3) == 0 ? 255 : rng.uniform_below(19));
    const fs::path p = tmp.path / "l.png";
    write_label_png(p, lbl);
    CHECK(read_label_png(p, table) == lbl);
}

TEST_CASE("label png rejects out-of-table values") {
    TempDir tmp;
    const ClassTable table = default_class_table("cityscapes19");
    LabelMap lbl(2, 2, 0);
    lbl.at(1, 0) = 37;
    const fs::path p = tmp.path / "l.png";
    write_label_png(p, lbl);
    CHECK_THROWS_WITH(read_label_png(p, table),
                      Catch::Matchers::ContainsSubstring("37") &&
                          Catch::Matchers::ContainsSubstring("(1,0)"));
}

TEST_CASE("label png rejects color and 16-bit images") {
    TempDir tmp;
    const ClassTable table = default_class_table("cityscapes19");

    const fs::path rgb = tmp.path / "rgb.png";
    dump(rgb, encode_rgb8_png(2, 2, std::vector<uint8_t>(12, 9)));
    CHECK_THROWS_WITH(read_label_png(rgb, table),
                      Catch::Matchers::ContainsSubstring("channel"));

    const fs::path deep = tmp.path / "deep.png";
    dump(deep, encode_gray16_png(2, 2, std::vector<uint16_t>(4, 1)));
    CHECK_THROWS_AS(read_label_png(deep, table), Error);
}

TEST_CASE("depth png round trip with invalid codes") {
    TempDir tmp;
    std::vector<float> vals{1.0f, 2.5f, 100.0f, 0.0f, 3.0f, 255.9921875f};
    std::vector<uint8_t> valid{1, 1, 1, 0, 0, 1};
    DepthMap d(3, 2, vals, valid);
    const fs::path p = tmp.path / "d.png";
    write_depth_png(p, d);
    const DepthMap back = read_depth_png(p);
    CHECK(back.valid_at(0, 0));
    CHECK_FALSE(back.valid_at(0, 1));
    CHECK_FALSE(back.valid_at(1, 1));
    CHECK(back.at(0, 0) == 1.0f);       // raw 256 / 256
    CHECK(back.at(1, 0) == 2.5f);       // raw 640 / 256
    CHECK(back.at(2, 0) == 100.0f);     // raw 25600 / 256
    CHECK(back.at(2, 1) == 255.9921875f); // raw 65534 / 256, the far cap
}

TEST_CASE("depth png clamps valid values away from the reserved codes") {
    TempDir tmp;
    // 256.5 would round to raw 65664 and 255.99609375 to exactly 65535; both
    // must land on the far cap 65534 rather than an invalid code.
    DepthMap d(2, 1, std::vector<float>{256.5f, 255.99609375f}, std::vector<uint8_t>{1, 1});
    const fs::path p = tmp.path / "d.png";
    write_depth_png(p, d);
    const DepthMap back = read_depth_png(p);
    CHECK(back.valid_at(0, 0));
    CHECK(back.valid_at(1, 0));
    CHECK(back.at(0, 0) == 255.9921875f);
    CHECK(back.at(1, 0) == 255.9921875f);
}

TEST_CASE("depth png raw codes 0 and 65535 decode as invalid") {
    TempDir tmp;
    const std::vector<uint16_t> raw{0, 256, 65535, 512};
    const fs::path p = tmp.path / "d.png";
    dump(p, encode_gray16_png(2, 2, raw));
    const DepthMap d = read_depth_png(p);
    CHECK_FALSE(d.valid_at(0, 0));
    CHECK(d.valid_at(1, 0));
    CHECK(d.at(1, 0) == 1.0f);
    CHECK_FALSE(d.valid_at(0, 1));
    CHECK(d.at(1, 1) == 2.0f);

    const DepthMap scaled = read_depth_png(p, 512.0);
    CHECK(scaled.at(1, 0) == 0.5f);
}

TEST_CASE("depth png rejects 8-bit input and bad scale") {
    TempDir tmp;
    const fs::path p = tmp.path / "d8.png";
    dump(p, encode_gray8_png(2, 2, std::vector<uint8_t>(4, 7)));
    CHECK_THROWS_AS(read_depth_png(p), Error);
    const fs::path q = tmp.path / "d16.png";
    dump(q, encode_gray16_png(1, 1, std::vector<uint16_t>{256}));
    CHECK_THROWS_AS(read_depth_png(q, 0.0), Error);
}

TEST_CASE("image png round trip and normalization") {
    TempDir tmp;
    SplitMix64 rng(52);
    ImageBuffer img(13, 7);
    for (auto& b : img.bytes())
        b = static_cast<uint8_t>(rng.uniform_below(256));
    const fs::path p = tmp.path / "i.png";
    write_image_png(p, img);
    CHECK(read_image_png(p) == img);

    // Gray input is promoted to 3 channels.
    const fs::path g = tmp.path / "g.png";
    dump(g, encode_gray8_png(2, 2, std::vector<uint8_t>{5, 6, 7, 8}));
    const ImageBuffer gimg = read_image_png(g);
    CHECK(gimg.at(1, 1)[0] == 8);
    CHECK(gimg.at(1, 1)[1] == 8);
    CHECK(gimg.at(1, 1)[2] == 8);
}

TEST_CASE("png decode rejects non-png bytes") {
    TempDir tmp;
    const fs::path p = tmp.path / "junk.png";
    const std::vector<uint8_t> junk{1, 2, 3, 4, 5, 6, 7, 8, 9};
    dump(p, junk);
    CHECK_THROWS_AS(read_image_png(p), Error);
    CHECK_THROWS_AS(read_depth_png(p), Error);
}

TEST_CASE("logits round trip is bit-exact") {
    TempDir tmp;
    SplitMix64 rng(53);
    LogitTensor t(5, 4, 19);
    for (auto& v : t.values())
        v = static_cast<float>(rng.uniform(-1000.0, 1000.0));
    t.values()[0] = 0.0f;
    t.values()[1] = -0.0f;
    t.values()[2] = 1.401298464324817e-45f; // denormal
    const fs::path p = tmp.path / "t.lgt";
    write_logits(p, t);
    const LogitTensor back = read_logits(p);
    REQUIRE(back.values().size() == t.values().size());
    for (size_t i = 0; i < t.values().size(); ++i) {
        const uint32_t a = std::bit_cast<uint32_t>(t.values()[i]);
        const uint32_t b = std::bit_cast<uint32_t>(back.values()[i]);
        CHECK(a == b);
    }
}

TEST_CASE("logits header layout is exactly as promised") {
    LogitTensor t(2, 1, 3);
    for (int c = 0; c < 3; ++c) {
        t.at(0, 0)[c] = static_cast<float>(c);
        t.at(1, 0)[c] = static_cast<float>(10 + c);
    }
    const std::vector<uint8_t> bytes = encode_logits(t);
    REQUIRE(bytes.size() == 4 + 12 + 6 * 4);
    CHECK(bytes[0] == 'L');
    CHECK(bytes[1] == 'G');
    CHECK(bytes[2] == 'T');
    CHECK(bytes[3] == '1');
    // little-endian height=1, width=2, channels=3
    CHECK(bytes[4] == 1);
    CHECK(bytes[5] == 0);
    CHECK(bytes[8] == 2);
    CHECK(bytes[12] == 3);
    // row-major (row, col, channel): first float is (0,0,c0)=0.0f
    float f0, f3;
    std::memcpy(&f0, bytes.data() + 16, 4);
    std::memcpy(&f3, bytes.data() + 16 + 3 * 4, 4);
    CHECK(f0 == 0.0f);
    CHECK(f3 == 10.0f);
}

TEST_CASE("logits error taxonomy") {
    TempDir tmp;
    LogitTensor t(2, 2, 2, 1.0f);
    std::vector<uint8_t> good = encode_logits(t);

    std::vector<uint8_t> bad_magic = good;
    bad_magic[0] = 'X';
    CHECK_THROWS_WITH(decode_logits(bad_magic, "x"),
                      Catch::Matchers::ContainsSubstring("magic"));

    std::vector<uint8_t> bad_version = good;
    bad_version[3] = '2';
    CHECK_THROWS_WITH(decode_logits(bad_version, "x"),
                      Catch::Matchers::ContainsSubstring("version"));

    std::vector<uint8_t> cut(good.begin(), good.end() - 4);
    CHECK_THROWS_WITH(decode_logits(cut, "x"),
                      Catch::Matchers::ContainsSubstring("truncated"));

    std::vector<uint8_t> trailing = good;
    trailing.push_back(0);
    CHECK_THROWS_AS(decode_logits(trailing, "x"), Error);

    std::vector<uint8_t> short_header(good.begin(), good.begin() + 10);
    CHECK_THROWS_AS(decode_logits(short_header, "x"), Error);

    t.values()[1] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_WITH(encode_logits(t), Catch::Matchers::ContainsSubstring("finite"));
}

TEST_CASE("weights file round trip") {
    TempDir tmp;
    const ClassTable table({{0, "road", false}, {1, "person", true}, {2, "sky", false}});
    FrequencyStats stats;
    stats.counts = {70, 10, 20};
    stats.total = 100;
    stats.freqs = {0.7, 0.1, 0.2};
    const ClassWeights w = compute_class_weights(stats);
    const fs::path p = tmp.path / "w.tsv";
    write_weights_file(p, table, stats, w);

    const WeightsFile back = load_weights_file(p);
    CHECK(back.delta == 1.02);
    CHECK(back.normalized);
    CHECK(back.names == std::vector<std::string>{"road", "person", "sky"});
    CHECK(back.freqs == stats.freqs);
    CHECK(back.weights.w_uda_raw == w.w_uda_raw);
    CHECK(back.weights.w_uda == w.w_uda);
    CHECK(back.weights.w_dep == w.w_dep);
    check_weights_match(back, table);

    const ClassTable other({{0, "road", false}, {1, "rider", true}, {2, "sky", false}});
    CHECK_THROWS_AS(check_weights_match(back, other), Error);
}

TEST_CASE("raw-mode weights file round trip") {
    TempDir tmp;
    const ClassTable table({{0, "a", false}, {1, "b", true}});
    FrequencyStats stats;
    stats.counts = {1, 1};
    stats.total = 2;
    stats.freqs = {0.5, 0.5};
    const ClassWeights w = compute_class_weights(stats, 1.02, false);
    const fs::path p = tmp.path / "w.tsv";
    write_weights_file(p, table, stats, w);
    const WeightsFile back = load_weights_file(p);
    CHECK_FALSE(back.normalized);
    CHECK(back.weights.w_uda == w.w_uda_raw);
    CHECK(back.weights.w_dep[0] < 0.0);
}

TEST_CASE("weights file parse errors") {
    const char* good = "segfuse-weights\t1\nmode\tnormalized\ndelta\t1.02\nclasses\t1\n"
                       "id\tname\tfreq\tw_uda_raw\tw_uda\tw_dep\n"
                       "0\troad\t1\t1.4222778260019157\t1\t0\n";
    CHECK(parse_weights_file(good, "t").names == std::vector<std::string>{"road"});

    CHECK_THROWS_AS(parse_weights_file("", "t"), Error);
    CHECK_THROWS_AS(parse_weights_file("not-a-weights-file\t1\n", "t"), Error);

    std::string wrong_count(good);
    wrong_count.replace(wrong_count.find("classes\t1"), 9, "classes\t2");
    CHECK_THROWS_AS(parse_weights_file(wrong_count, "t"), Error);

    std::string broken_sum(good);
    broken_sum.replace(broken_sum.find("\t1\t0\n"), 5, "\t1\t0.5\n");
    CHECK_THROWS_AS(parse_weights_file(broken_sum, "t"), Error);

    std::string bad_max(good);
    bad_max.replace(bad_max.find("\t1\t0\n"), 5, "\t0.5\t0.5\n");
    CHECK_THROWS_AS(parse_weights_file(bad_max, "t"), Error);
}

TEST_CASE("manifest round trip and path resolution") {
    TempDir tmp;
    fs::create_directories(tmp.path / "data");
    const ClassTable table({{0, "a", false}});
    LabelMap lbl(2, 2, 0);
    write_label_png(tmp.path / "data" / "x_label.png", lbl);
    ImageBuffer img(2, 2);
    write_image_png(tmp.path / "data" / "x_image.png", img);
    DepthMap d(2, 2, 1.0f);
    write_depth_png(tmp.path / "data" / "x_depth.png", d);

    ManifestRecord r;
    r.id = "x";
    r.image_path = "data/x_image.png";
    r.depth_path = "data/x_depth.png";
    r.label_path = "data/x_label.png";
    write_manifest(tmp.path / "m.jsonl", std::vector<ManifestRecord>{r});

    const auto records = load_manifest(tmp.path / "m.jsonl");
    REQUIRE(records.size() == 1);
    CHECK(records[0].id == "x");
    // Paths come back resolved against the manifest's directory.
    CHECK(records[0].image_path == tmp.path / "data" / "x_image.png");
    CHECK(records[0].label_path.has_value());
    CHECK_FALSE(records[0].logits_dep_path.has_value());
}

TEST_CASE("manifest validation errors") {
    TempDir tmp;
    const fs::path m = tmp.path / "m.jsonl";

    write_text_atomic(m, "{\"id\": \"a\", \"image\": \"missing.png\", \"depth\": \"missing.png\"}\n");
    CHECK_THROWS_WITH(load_manifest(m), Catch::Matchers::ContainsSubstring("missing.png"));

    write_text_atomic(m, "not json\n");
    CHECK_THROWS_WITH(load_manifest(m), Catch::Matchers::ContainsSubstring("line 1"));

    write_text_atomic(m, "{\"image\": \"x\", \"depth\": \"y\"}\n");
    CHECK_THROWS_AS(load_manifest(m), Error);

    ImageBuffer img(1, 1);
    write_image_png(tmp.path / "i.png", img);
    DepthMap d(1, 1, 1.0f);
    write_depth_png(tmp.path / "d.png", d);
    const std::string rec = "{\"id\": \"a\", \"image\": \"i.png\", \"depth\": \"d.png\"}\n";
    write_text_atomic(m, rec + rec);
    CHECK_THROWS_WITH(load_manifest(m), Catch::Matchers::ContainsSubstring("duplicate"));

    write_text_atomic(m, "{\"id\": \"a/b\", \"image\": \"i.png\", \"depth\": \"d.png\"}\n");
    CHECK_THROWS_AS(load_manifest(m), Error);

    write_text_atomic(m,
                      "{\"id\": \"a\", \"image\": \"i.png\", \"depth\": \"d.png\", \"bogus\": 1}\n");
    CHECK_THROWS_WITH(load_manifest(m), Catch::Matchers::ContainsSubstring("bogus"));

    // Blank lines are fine.
    write_text_atomic(m, "\n" + rec + "\n");
    CHECK(load_manifest(m).size() == 1);
}

TEST_CASE("class table json and resolution") {
    TempDir tmp;
    const ClassTable t = default_class_table("synseq12");
    const std::string json = class_table_to_json(t);
    CHECK(class_table_from_json(json, "t") == t);

    const fs::path p = tmp.path / "table.json";
    write_text_atomic(p, json);
    CHECK(resolve_class_table(p.string()) == t);
    CHECK(resolve_class_table("cityscapes19") == default_class_table("cityscapes19"));
    CHECK_THROWS_AS(resolve_class_table("no_such_preset"), Error);
    CHECK_THROWS_AS(class_table_from_json("{\"classes\": []}", "t"), Error);
}

TEST_CASE("sha256 known vectors") {
    const std::string abc = "abc";
    const std::span<const uint8_t> bytes{reinterpret_cast<const uint8_t*>(abc.data()),
                                         abc.size()};
    CHECK(sha256_hex(bytes) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex({}) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");

    TempDir tmp;
    write_text_atomic(tmp.path / "f", "abc");
    CHECK(sha256_hex_file(tmp.path / "f") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("atomic writes leave no temp files") {
    TempDir tmp;
    write_text_atomic(tmp.path / "a.txt", "hello");
    const auto bytes = read_file(tmp.path / "a.txt");
    CHECK(std::string(bytes.begin(), bytes.end()) == "hello");
    size_t entries = 0;
    for (const auto& e : fs::directory_iterator(tmp.path)) {
        (void)e;
        ++entries;
    }
    CHECK(entries == 1);
    CHECK_THROWS_AS(read_file(tmp.path / "nope.txt"), Error);
}

TEST_CASE("colorize uses the known palette and black ignore") {
    const ClassTable table = default_class_table("cityscapes19");
    LabelMap lbl(2, 1);
    lbl.at(0, 0) = 0;   // road: 128, 64, 128
    lbl.at(1, 0) = 255; // ignore: black
    const ImageBuffer img = colorize_labels(lbl, table);
    CHECK(img.at(0, 0)[0] == 128);
    CHECK(img.at(0, 0)[1] == 64);
    CHECK(img.at(0, 0)[2] == 128);
    CHECK(img.at(1, 0)[0] == 0);
    CHECK(img.at(1, 0)[1] == 0);
    CHECK(img.at(1, 0)[2] == 0);
}
