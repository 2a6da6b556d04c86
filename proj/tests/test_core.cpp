#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <fstream>

#include <zlib.h>

#include "mqc/preprocess.hpp"
#include "mqc/volume_io.hpp"
#include "support/test_util.hpp"

using namespace mqc;
using test::TmpDir;

namespace {

// Writes a minimal NIfTI-1 file byte by byte, independent of the reader.
std::vector<char> nifti_bytes(int nx, int ny, int nz, float sx, float sy, float sz,
                              const std::vector<float>& payload) {
    std::vector<char> buf(352 + payload.size() * sizeof(float), 0);
    const auto put_i32 = [&](std::size_t off, std::int32_t v) { std::memcpy(&buf[off], &v, 4); };
    const auto put_i16 = [&](std::size_t off, std::int16_t v) { std::memcpy(&buf[off], &v, 2); };
    const auto put_f32 = [&](std::size_t off, float v) { std::memcpy(&buf[off], &v, 4); };
    put_i32(0, 348);                       // sizeof_hdr
    put_i16(40, 3);                        // dim[0]
    put_i16(42, static_cast<std::int16_t>(nx));
    put_i16(44, static_cast<std::int16_t>(ny));
    put_i16(46, static_cast<std::int16_t>(nz));
    put_i16(70, 16);                       // datatype float32
    put_i16(72, 32);                       // bitpix
    put_f32(76, 1.0f);                     // pixdim[0]
    put_f32(80, sx);
    put_f32(84, sy);
    put_f32(88, sz);
    put_f32(108, 352.0f);                  // vox_offset
    std::memcpy(&buf[344], "n+1\0", 4);
    std::memcpy(&buf[352], payload.data(), payload.size() * sizeof(float));
    return buf;
}

} // namespace

TEST_CASE("portable volume round trip is bit exact") {
    TmpDir tmp("core_roundtrip");
    Rng rng(11);
    Volume v = test::make_volume({4, 6, 5}, 0.0f, {2.5, 0.8, 0.8});
    v.id = "vol-a";
    for (auto& x : v.data) x = static_cast<float>(rng.normal(0.0, 500.0));

    const std::string path = tmp.file("v.mqv");
    save_volume(v, path);
    const Volume back = load_volume(path, VolumeFormat::portable);
    CHECK(back.shape == v.shape);
    CHECK(back.spacing == v.spacing);
    CHECK(back.id == v.id);
    CHECK(back.data == v.data); // bitwise

    // Two saves of the same volume produce identical bytes.
    const std::string path2 = tmp.file("v2.mqv");
    save_volume(v, path2);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(a)), {});
    const std::string bytes_b((std::istreambuf_iterator<char>(b)), {});
    CHECK(bytes_a == bytes_b);
}

TEST_CASE("mask round trip keeps class id") {
    TmpDir tmp("core_mask");
    Mask m = test::make_mask({3, 4, 4}, {3.0, 1.0, 1.0});
    m.id = "m1";
    m.class_id = 7;
    m.at(1, 2, 2) = 1;
    save_mask(m, tmp.file("m.mqv"));
    const Mask back = load_mask(tmp.file("m.mqv"), VolumeFormat::portable);
    CHECK(back.class_id == 7);
    CHECK(back.data == m.data);
    CHECK(back.spacing == m.spacing);
}

TEST_CASE("load errors: missing file, corrupt header, payload mismatch") {
    TmpDir tmp("core_errors");
    CHECK_THROWS_AS(load_volume(tmp.file("absent.mqv"), VolumeFormat::portable), IoError);

    {
        std::ofstream out(tmp.file("garbage.mqv"), std::ios::binary);
        out << "{not json\n1234";
    }
    CHECK_THROWS_AS(load_volume(tmp.file("garbage.mqv"), VolumeFormat::portable), FormatError);

    // Unwritable destination.
    Volume v = test::make_volume({2, 2, 2}, 1.0f);
    CHECK_THROWS_AS(save_volume(v, tmp.file("no/such/dir/v.mqv")), IoError);

    // Header promises more payload than the file holds.
    save_volume(v, tmp.file("short.mqv"));
    {
        std::ifstream in(tmp.file("short.mqv"), std::ios::binary);
        std::string all((std::istreambuf_iterator<char>(in)), {});
        all.resize(all.size() - 4);
        std::ofstream out(tmp.file("short.mqv"), std::ios::binary | std::ios::trunc);
        out << all;
    }
    CHECK_THROWS_AS(load_volume(tmp.file("short.mqv"), VolumeFormat::portable), FormatError);
}

TEST_CASE("nifti ingestion maps dims and spacing to (z,y,x)") {
    TmpDir tmp("core_nifti");
    const int nx = 64, ny = 64, nz = 32;
    std::vector<float> payload(static_cast<std::size_t>(nx) * ny * nz);
    for (std::size_t i = 0; i < payload.size(); ++i)
        payload[i] = static_cast<float>(i % 37) - 18.0f;
    const auto bytes = nifti_bytes(nx, ny, nz, 1.0f, 1.0f, 3.0f, payload);

    {
        std::ofstream out(tmp.file("fix.nii"), std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    const Volume v = load_volume(tmp.file("fix.nii"), VolumeFormat::nifti);
    CHECK(v.shape == GridSize{32, 64, 64});
    CHECK(v.spacing.z == doctest::Approx(3.0));
    CHECK(v.spacing.y == doctest::Approx(1.0));
    CHECK(v.spacing.x == doctest::Approx(1.0));
    // x is the fastest axis in the file; (z=0, y=0, x=5) is payload[5].
    CHECK(v.at(0, 0, 5) == payload[5]);
    CHECK(v.at(1, 0, 0) == payload[static_cast<std::size_t>(nx) * ny]);

    // The gzipped variant reads identically.
    gzFile gz = gzopen(tmp.file("fix.nii.gz").c_str(), "wb");
    REQUIRE(gz != nullptr);
    gzwrite(gz, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(gz);
    const Volume vgz = load_volume(tmp.file("fix.nii.gz"), VolumeFormat::nifti);
    CHECK(vgz.data == v.data);
    CHECK(guess_format("a/b/fix.nii.gz") == VolumeFormat::nifti);
    CHECK(guess_format("a/b/fix.mqv") == VolumeFormat::portable);
}

TEST_CASE("hu normalization clips to [-200,200] and rescales") {
    CHECK(normalize_hu(300.0f) == doctest::Approx(1.0));
    CHECK(normalize_hu(-500.0f) == doctest::Approx(0.0));
    CHECK(normalize_hu(0.0f) == doctest::Approx(0.5));
    CHECK(normalize_hu(-200.0f) == doctest::Approx(0.0));
    CHECK(normalize_hu(200.0f) == doctest::Approx(1.0));

    // Whole-slice constants survive resampling untouched.
    Volume img = test::make_volume({1, 32, 32}, 300.0f);
    Mask mask = test::make_mask({1, 32, 32});
    test::fill_box(mask, 0, 0, 10, 20, 10, 20);
    const auto pair = preprocess_pair(img, mask, 0, 1);
    REQUIRE(pair.has_value());
    for (int y = 0; y < kSliceSize; ++y)
        for (int x = 0; x < kSliceSize; ++x) {
            const float v = pair->image(y, x);
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    CHECK(pair->image(128, 128) == doctest::Approx(1.0));
}

TEST_CASE("full-slice mask crops to the centered window") {
    Volume img = test::make_volume({1, kSliceSize, kSliceSize}, 100.0f);
    Mask mask = test::make_mask({1, kSliceSize, kSliceSize});
    test::fill_box(mask, 0, 0, 0, kSliceSize - 1, 0, kSliceSize - 1);
    const auto pair = preprocess_pair(img, mask, 0, 3);
    REQUIRE(pair.has_value());
    CHECK(pair->class_id == 3);

    // Window is 1.5x the slice; the interior two thirds carry the mask.
    for (int y = 50; y < 206; ++y)
        for (int x = 50; x < 206; ++x) REQUIRE(pair->mask(y, x) == 1.0f);
    CHECK(pair->mask(0, 0) == 0.0f);
    CHECK(pair->mask(255, 255) == 0.0f);
    CHECK(pair->image(0, 0) == 0.0f); // zero padding outside the slice

    std::size_t ones = 0;
    for (int y = 0; y < kSliceSize; ++y)
        for (int x = 0; x < kSliceSize; ++x) ones += pair->mask(y, x) == 1.0f;
    const double frac = static_cast<double>(ones) / (kSliceSize * kSliceSize);
    CHECK(frac == doctest::Approx(256.0 * 256.0 / (384.0 * 384.0)).epsilon(0.02));
}

TEST_CASE("empty slice yields the skip signal, not a pair") {
    Volume img = test::make_volume({3, 16, 16}, 0.0f);
    Mask mask = test::make_mask({3, 16, 16});
    mask.at(1, 8, 8) = 1;
    CHECK_FALSE(preprocess_pair(img, mask, 0, 1).has_value());
    CHECK(preprocess_pair(img, mask, 1, 1).has_value());
    CHECK_THROWS_AS(preprocess_pair(img, mask, 5, 1), ValueError);

    Mask multi = test::make_mask({3, 16, 16});
    multi.at(1, 8, 8) = 2;
    CHECK_THROWS_AS(preprocess_pair(img, multi, 1, 1), ValueError);
}

TEST_CASE("image channel stays in [0,1] under extreme values") {
    Rng rng(99);
    for (int rep = 0; rep < 10; ++rep) {
        Volume img = test::make_volume({2, 24, 24});
        for (auto& v : img.data) v = static_cast<float>(rng.uniform(-1e6, 1e6));
        Mask mask = test::make_mask({2, 24, 24});
        test::fill_box(mask, 0, 1, 5, 18, 5, 18);
        const auto pair = preprocess_pair(img, mask, 1, 1);
        REQUIRE(pair.has_value());
        for (int i = 0; i < kSliceSize * kSliceSize; ++i) {
            REQUIRE(pair->pixels[i] >= 0.0f);
            REQUIRE(pair->pixels[i] <= 1.0f);
            const float mv = pair->pixels[kSliceSize * kSliceSize + i];
            REQUIRE((mv == 0.0f || mv == 1.0f));
        }
    }
}

TEST_CASE("slice sampling follows the linspace rule") {
    Mask mask = test::make_mask({64, 8, 8});
    for (int z = 10; z <= 49; ++z) mask.at(z, 4, 4) = 1;
    CHECK(sample_slices(mask, 10) ==
          std::vector<int>{10, 14, 19, 23, 27, 32, 36, 40, 45, 49});
    CHECK(sample_slices(mask, 1) == std::vector<int>{30});

    Mask small = test::make_mask({16, 8, 8});
    for (int z = 5; z <= 7; ++z) small.at(z, 4, 4) = 1;
    CHECK(sample_slices(small, 10) == std::vector<int>{5, 6, 7});

    Mask empty = test::make_mask({16, 8, 8});
    CHECK_THROWS_AS(sample_slices(empty, 10), EmptyMaskError);
}

TEST_CASE("slice sampling: sorted, unique, within extent, right count") {
    Rng rng(7);
    for (int rep = 0; rep < 50; ++rep) {
        Mask mask = test::make_mask({40, 6, 6});
        const int z0 = static_cast<int>(rng.uniform_int(0, 20));
        const int z1 = static_cast<int>(rng.uniform_int(z0, 39));
        int nonempty = 0;
        for (int z = z0; z <= z1; ++z)
            if (z == z0 || z == z1 || rng.uniform() < 0.8) {
                mask.at(z, 3, 3) = 1;
                ++nonempty;
            }
        const int k = static_cast<int>(rng.uniform_int(1, 15));
        const auto zs = sample_slices(mask, k);
        REQUIRE(static_cast<int>(zs.size()) == std::min(k, nonempty));
        REQUIRE(std::is_sorted(zs.begin(), zs.end()));
        REQUIRE(std::adjacent_find(zs.begin(), zs.end()) == zs.end());
        REQUIRE(zs.front() >= z0);
        REQUIRE(zs.back() <= z1);
    }
}
