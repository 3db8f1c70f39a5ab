#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "msnet/data.hpp"
#include "msnet/error.hpp"
#include "msnet/pnm.hpp"

using namespace msnet;
namespace fs = std::filesystem;

namespace {

int count_blobs(const BinMap& mask) {
    BinMap seen{mask.h, mask.w, std::vector<std::uint8_t>(mask.v.size(), 0)};
    int blobs = 0;
    std::vector<std::pair<int, int>> stack;
    for (int sy = 0; sy < mask.h; ++sy)
        for (int sx = 0; sx < mask.w; ++sx) {
            if (!mask.at(sy, sx) || seen.at(sy, sx)) continue;
            ++blobs;
            stack.emplace_back(sy, sx);
            seen.at(sy, sx) = 1;
            while (!stack.empty()) {
                auto [y, x] = stack.back();
                stack.pop_back();
                const int ny[4] = {y - 1, y + 1, y, y};
                const int nx[4] = {x, x, x - 1, x + 1};
                for (int k = 0; k < 4; ++k) {
                    if (ny[k] < 0 || ny[k] >= mask.h || nx[k] < 0 || nx[k] >= mask.w) continue;
                    if (!mask.at(ny[k], nx[k]) || seen.at(ny[k], nx[k])) continue;
                    seen.at(ny[k], nx[k]) = 1;
                    stack.emplace_back(ny[k], nx[k]);
                }
            }
        }
    return blobs;
}

std::string file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("generate_sample determinism and contracts") {
    for (std::uint64_t seed : {1ULL, 7ULL, 99ULL, 1234ULL}) {
        SegmentationSample a = generate_sample(seed, 64, Difficulty::easy);
        SegmentationSample b = generate_sample(seed, 64, Difficulty::easy);
        CHECK(a.image.v == b.image.v);
        CHECK(a.mask.v == b.mask.v);

        for (double v : a.image.v) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        for (auto m : a.mask.v) CHECK((m == 0 || m == 1));

        const double frac = static_cast<double>(std::count(a.mask.v.begin(), a.mask.v.end(), 1)) /
                            static_cast<double>(a.mask.v.size());
        CHECK(frac >= 0.01);
        CHECK(frac <= 0.6);

        const int blobs = count_blobs(a.mask);
        CHECK(blobs >= 1);
        CHECK(blobs <= 3);
    }
    CHECK_THROWS_AS(generate_sample(1, 48, Difficulty::easy), Error);
}

TEST_CASE("easy samples separate foreground and background intensities") {
    for (std::uint64_t seed = 1; seed <= 24; ++seed) {
        SegmentationSample s = generate_sample(seed, 64, Difficulty::easy);
        double inside = 0.0, outside = 0.0;
        long long n_in = 0, n_out = 0;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                const double mean_rgb =
                    (s.image.at(0, y, x) + s.image.at(1, y, x) + s.image.at(2, y, x)) / 3.0;
                if (s.mask.at(y, x)) {
                    inside += mean_rgb;
                    ++n_in;
                } else {
                    outside += mean_rgb;
                    ++n_out;
                }
            }
        REQUIRE(n_in > 0);
        REQUIRE(n_out > 0);
        CHECK(inside / n_in - outside / n_out >= 0.3);
    }
}

TEST_CASE("generate_dataset split sizes, manifest and refusal") {
    const fs::path dir = fs::temp_directory_path() / "msnet_test_gen";
    fs::remove_all(dir);

    DatasetCounts counts = generate_dataset(dir, 5, 100, 32, Difficulty::easy, {0.8, 0.1, 0.1}, false);
    CHECK(counts.train == 80);
    CHECK(counts.val == 10);
    CHECK(counts.test == 10);

    int images = 0, masks = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / "images")) ++images;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / "masks")) ++masks;
    CHECK(images == 100);
    CHECK(masks == 100);

    std::ifstream manifest(dir / "manifest.txt");
    std::string split, id;
    std::set<std::string> ids;
    int lines = 0;
    while (manifest >> split >> id) {
        ++lines;
        CHECK((split == "train" || split == "val" || split == "test"));
        CHECK(ids.insert(id).second);  // no collisions across splits
    }
    CHECK(lines == 100);

    // refuses to clobber without force
    CHECK_THROWS_WITH_AS(generate_dataset(dir, 5, 100, 32, Difficulty::easy, {0.8, 0.1, 0.1}, false),
                         doctest::Contains("force"), Error);

    fs::remove_all(dir);
}

TEST_CASE("n=20 with 80/10/10 ratios gives 16/2/2") {
    const fs::path dir = fs::temp_directory_path() / "msnet_test_gen20";
    fs::remove_all(dir);
    DatasetCounts counts = generate_dataset(dir, 5, 20, 32, Difficulty::medium, {0.8, 0.1, 0.1}, false);
    CHECK(counts.train == 16);
    CHECK(counts.val == 2);
    CHECK(counts.test == 2);
    fs::remove_all(dir);
}

TEST_CASE("regeneration with the same seed reproduces identical bytes") {
    const fs::path a = fs::temp_directory_path() / "msnet_test_gen_a";
    const fs::path b = fs::temp_directory_path() / "msnet_test_gen_b";
    fs::remove_all(a);
    fs::remove_all(b);
    generate_dataset(a, 11, 12, 32, Difficulty::hard, {0.5, 0.25, 0.25}, false);
    generate_dataset(b, 11, 12, 32, Difficulty::hard, {0.5, 0.25, 0.25}, false);

    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), a);
        CHECK_MESSAGE(file_bytes(entry.path()) == file_bytes(b / rel), rel.string());
    }
    // a different seed changes the data
    const fs::path c = fs::temp_directory_path() / "msnet_test_gen_c";
    fs::remove_all(c);
    generate_dataset(c, 12, 12, 32, Difficulty::hard, {0.5, 0.25, 0.25}, false);
    CHECK(file_bytes(a / "images" / "train_0000.ppm") != file_bytes(c / "images" / "train_0000.ppm"));
    fs::remove_all(a);
    fs::remove_all(b);
    fs::remove_all(c);
}

TEST_CASE("load_split returns manifest order and checks sizes") {
    const fs::path dir = fs::temp_directory_path() / "msnet_test_load";
    fs::remove_all(dir);
    generate_dataset(dir, 3, 10, 32, Difficulty::easy, {0.8, 0.1, 0.1}, false);
    auto train = load_split(dir, "train");
    CHECK(train.size() == 8);
    CHECK(train[0].id == "train_0000");
    CHECK(train[7].id == "train_0007");
    CHECK_THROWS_AS(load_split(dir, "nope"), Error);
    fs::remove_all(dir);
}

TEST_CASE("horizontal flip is an involution preserving correspondence") {
    SegmentationSample s = generate_sample(21, 64, Difficulty::easy);
    SegmentationSample flipped = s;
    hflip(flipped);
    // a pixel inside the mask maps to a pixel inside the mask
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            CHECK(flipped.mask.at(y, 63 - x) == s.mask.at(y, x));
    hflip(flipped);
    CHECK(flipped.image.v == s.image.v);
    CHECK(flipped.mask.v == s.mask.v);
}

TEST_CASE("rotation by zero degrees is the identity") {
    SegmentationSample s = generate_sample(22, 64, Difficulty::medium);
    SegmentationSample rotated = s;
    rotate_nearest(rotated, 0.0);
    CHECK(rotated.image.v == s.image.v);
    CHECK(rotated.mask.v == s.mask.v);
}

TEST_CASE("augmentation keeps the mask strictly binary") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        SegmentationSample s = generate_sample(100 + trial, 64, Difficulty::hard);
        augment(s, rng);
        CHECK(s.image.h == 64);
        for (auto m : s.mask.v) CHECK((m == 0 || m == 1));
        for (double v : s.image.v) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("snap_to_multiple_of_32 tie and rounding rules") {
    CHECK(snap_to_multiple_of_32(48) == 64);  // documented tie, rounds up
    CHECK(snap_to_multiple_of_32(80) == 96);
    CHECK(snap_to_multiple_of_32(64) == 64);
    CHECK(snap_to_multiple_of_32(33) == 32);
    CHECK(snap_to_multiple_of_32(47) == 32);
    CHECK(snap_to_multiple_of_32(49) == 64);
    CHECK(snap_to_multiple_of_32(10) == 32);  // floored at the minimum legal side
}

TEST_CASE("multiscale resize identities and binarity") {
    SegmentationSample s = generate_sample(24, 64, Difficulty::easy);
    std::vector<SegmentationSample> batch{s};

    multiscale_resize(batch, 1.0);
    CHECK(batch[0].image.v == s.image.v);
    CHECK(batch[0].mask.v == s.mask.v);

    multiscale_resize(batch, 1.25);  // 80 -> 96
    CHECK(batch[0].image.h == 96);
    CHECK(batch[0].mask.w == 96);
    for (auto m : batch[0].mask.v) CHECK((m == 0 || m == 1));

    std::vector<SegmentationSample> batch2{s};
    multiscale_resize(batch2, 0.75);  // 48 -> snaps back to 64
    CHECK(batch2[0].image.h == 64);
    CHECK(batch2[0].image.v == s.image.v);
}

TEST_CASE("ppm round trip") {
    const fs::path dir = fs::temp_directory_path() / "msnet_test_pnm";
    fs::remove_all(dir);
    fs::create_directories(dir);

    SegmentationSample s = generate_sample(25, 32, Difficulty::easy);
    write_ppm(dir / "img.ppm", s.image);
    Image3 once = read_ppm(dir / "img.ppm");
    CHECK(once.h == 32);
    // first read is within quantization distance of the source
    for (std::size_t i = 0; i < s.image.v.size(); ++i)
        CHECK(std::fabs(once.v[i] - s.image.v[i]) <= 0.5 / 255.0 + 1e-12);
    // a second round trip is exact
    write_ppm(dir / "img2.ppm", once);
    Image3 twice = read_ppm(dir / "img2.ppm");
    CHECK(twice.v == once.v);
    CHECK(file_bytes(dir / "img.ppm") == file_bytes(dir / "img2.ppm"));
    fs::remove_all(dir);
}

TEST_CASE("pgm masks round trip and binarize at 128") {
    const fs::path dir = fs::temp_directory_path() / "msnet_test_pgm";
    fs::remove_all(dir);
    fs::create_directories(dir);

    SegmentationSample s = generate_sample(26, 32, Difficulty::easy);
    write_pgm(dir / "mask.pgm", s.mask);
    BinMap mask = read_mask(dir / "mask.pgm");
    CHECK(mask.v == s.mask.v);

    // gray value 200 on disk binarizes to 1, 100 to 0
    {
        std::ofstream out(dir / "gray.pgm", std::ios::binary);
        out << "P5\n2 1\n255\n";
        const unsigned char bytes[2] = {200, 100};
        out.write(reinterpret_cast<const char*>(bytes), 2);
    }
    BinMap gray = read_mask(dir / "gray.pgm");
    CHECK(gray.v == std::vector<std::uint8_t>{1, 0});

    // 2x2 checkerboard fixture from raw bytes
    {
        std::ofstream out(dir / "checker.pgm", std::ios::binary);
        out << "P5\n# checker\n2 2\n255\n";
        const unsigned char bytes[4] = {0, 255, 255, 0};
        out.write(reinterpret_cast<const char*>(bytes), 4);
    }
    BinMap checker = read_mask(dir / "checker.pgm");
    CHECK(checker.v == std::vector<std::uint8_t>{0, 1, 1, 0});
    fs::remove_all(dir);
}

TEST_CASE("malformed pnm files raise parse errors with byte offsets") {
    const fs::path dir = fs::temp_directory_path() / "msnet_test_badpnm";
    fs::remove_all(dir);
    fs::create_directories(dir);

    {
        std::ofstream out(dir / "badmagic.pgm", std::ios::binary);
        out << "P4\n2 2\n255\n....";
    }
    CHECK_THROWS_WITH_AS(read_mask(dir / "badmagic.pgm"), doctest::Contains("magic"), Error);

    {
        std::ofstream out(dir / "truncated.pgm", std::ios::binary);
        out << "P5\n4 4\n255\n";
        const unsigned char bytes[3] = {1, 2, 3};
        out.write(reinterpret_cast<const char*>(bytes), 3);
    }
    CHECK_THROWS_WITH_AS(read_mask(dir / "truncated.pgm"),
                         doctest::Contains("truncated"), Error);
    CHECK_THROWS_WITH_AS(read_mask(dir / "truncated.pgm"), doctest::Contains("byte"), Error);

    {
        std::ofstream out(dir / "nonsense.pgm", std::ios::binary);
        out << "P5\nxx yy\n255\n";
    }
    CHECK_THROWS_WITH_AS(read_mask(dir / "nonsense.pgm"), doctest::Contains("digit"), Error);

    CHECK_THROWS_AS(read_ppm(dir / "missing.ppm"), Error);
    fs::remove_all(dir);
}
