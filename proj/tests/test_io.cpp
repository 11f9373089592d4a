#include <doctest.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <random>
#include <set>

#include "lposs/config.hpp"
#include "lposs/io.hpp"
#include "lposs/manifest.hpp"
#include "lposs/synth.hpp"

using namespace lposs;
namespace fs = std::filesystem;

namespace {

const fs::path kData = LPOSS_TEST_DATA;

std::vector<std::uint8_t> slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

void spit(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(p, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "lposs_test_io";
    fs::create_directories(dir);
    return dir / name;
}

IoErrorKind kind_of(const std::vector<std::uint8_t>& bytes) {
    try {
        decode_tensor(bytes);
    } catch (const IoError& e) {
        return e.kind();
    }
    FAIL("decode accepted a corrupted buffer");
    return IoErrorKind::open_failed;
}

} // namespace

TEST_CASE("golden files decode to the expected values and re-encode bitwise") {
    const Tensor f = read_tensor(kData / "golden_f32_2x3.lpt");
    CHECK(f.dtype() == DType::f32);
    CHECK(f.shape == std::vector<std::uint64_t>{2, 3});
    const auto& fv = f.values<float>();
    CHECK(fv[0] == 0.0f);
    CHECK(std::signbit(fv[1]));
    CHECK(fv[2] == 1.5f);
    CHECK(fv[3] == -2.25f);
    CHECK(fv[4] == std::numeric_limits<float>::denorm_min());
    CHECK(fv[5] == std::numeric_limits<float>::max());

    const Tensor u = read_tensor(kData / "golden_u8_4.lpt");
    CHECK(u.values<std::uint8_t>() == std::vector<std::uint8_t>{0, 1, 127, 255});
    const Tensor i = read_tensor(kData / "golden_i32_2x2.lpt");
    CHECK(i.values<std::int32_t>() ==
          std::vector<std::int32_t>{-1, 0, std::numeric_limits<std::int32_t>::max(), std::numeric_limits<std::int32_t>::min()});
    CHECK_THROWS_AS(i.values<float>(), IoError);

    for (const char* name : {"golden_f32_2x3.lpt", "golden_u8_4.lpt", "golden_i32_2x2.lpt", "golden_zeros_f32_2x3.lpt",
                             "golden_f32_1x2x2x3.lpt"}) {
        const auto bytes = slurp(kData / name);
        CHECK(encode_tensor(decode_tensor(bytes)) == bytes);
        const fs::path out = scratch(name);
        write_tensor(read_tensor(kData / name), out);
        CHECK(slurp(out) == bytes);
    }
}

TEST_CASE("zeros f32 [2, 3] is 60 bytes") {
    Tensor t{{2, 3}, std::vector<float>(6, 0.0f)};
    CHECK(encode_tensor(t).size() == 60);
    CHECK(encode_tensor(t) == slurp(kData / "golden_zeros_f32_2x3.lpt"));
}

TEST_CASE("random tensors round-trip bitwise") {
    std::mt19937 rng(1);
    for (int k = 0; k < 20; ++k) {
        std::vector<float> v(static_cast<std::size_t>(1 + rng() % 300));
        for (auto& x : v)
            x = std::bit_cast<float>(static_cast<std::uint32_t>((rng() & 0x7f7fffffu) | (rng() & 1u) << 31));
        Tensor t{{v.size()}, v};
        const Tensor back = decode_tensor(encode_tensor(t));
        CHECK(std::memcmp(back.values<float>().data(), v.data(), v.size() * 4) == 0);
    }
    Tensor labels{{3, 2}, std::vector<std::int32_t>{1, -5, 7, 0, 255, 3}};
    CHECK(decode_tensor(encode_tensor(labels)).values<std::int32_t>() == labels.values<std::int32_t>());
}

TEST_CASE("corrupted containers raise distinct error kinds") {
    const auto good = slurp(kData / "golden_f32_2x3.lpt");
    auto b = good;
    b[0] = 'X';
    CHECK(kind_of(b) == IoErrorKind::bad_magic);
    b = good;
    b[4] = 2;
    CHECK(kind_of(b) == IoErrorKind::bad_version);
    b = good;
    b[8] = 9;
    CHECK(kind_of(b) == IoErrorKind::bad_dtype);
    b = good;
    b.resize(b.size() - 3);
    CHECK(kind_of(b) == IoErrorKind::truncated);
    b = good;
    b.resize(10);
    CHECK(kind_of(b) == IoErrorKind::truncated);
    b = good;
    b.push_back(0);
    CHECK(kind_of(b) == IoErrorKind::truncated);
    b = good;
    b[34] ^= 0x01;
    CHECK(kind_of(b) == IoErrorKind::crc_mismatch);
    b = good;
    b[b.size() - 1] ^= 0x80;
    CHECK(kind_of(b) == IoErrorKind::crc_mismatch);

    try {
        read_tensor(scratch("does_not_exist.lpt"));
        FAIL("expected an error");
    } catch (const IoError& e) {
        CHECK(e.kind() == IoErrorKind::open_failed);
    }
    spit(scratch("trunc.lpt"), std::vector<std::uint8_t>(good.begin(), good.end() - 1));
    try {
        read_tensor(scratch("trunc.lpt"));
        FAIL("expected an error");
    } catch (const IoError& e) {
        CHECK(e.kind() == IoErrorKind::truncated);
    }
    CHECK_THROWS_AS(encode_tensor(Tensor{{2, 2}, std::vector<float>(3)}), IoError);
}

TEST_CASE("grid conversions round-trip through tensors") {
    std::mt19937 rng(2);
    FeatureGrid g(3, 4, 5);
    for (Index i = 0; i < g.matrix().size(); ++i)
        g.matrix().data()[i] = static_cast<float>(std::normal_distribution<double>()(rng));
    CHECK(feature_grid_from(decode_tensor(encode_tensor(to_tensor(g)))).matrix() == g.matrix());

    LabelMap m(4, 3, 1);
    m(2, 1) = 255;
    CHECK(label_map_from(to_tensor(m)) == m);
    Tensor u8{{1, 3}, std::vector<std::uint8_t>{0, 4, 255}};
    const LabelMap from_u8 = label_map_from(u8);
    CHECK(from_u8(0, 2) == 255);
    CHECK(from_u8(0, 1) == 4);

    RgbImage img(2, 3);
    img.pixels.setRandom();
    CHECK(rgb_image_from(to_tensor(img)).pixels == img.pixels);

    std::vector<FeatureGrid> wins{g, g};
    const auto back = window_features_from(to_tensor(wins));
    CHECK(back.size() == 2);
    CHECK(back[1].matrix() == g.matrix());

    ClassEmbeddings ce;
    ce.matrix = Eigen::MatrixXd::Identity(4, 3);
    CHECK(class_embeddings_from(to_tensor(ce)).matrix == ce.matrix);

    CHECK_THROWS_AS(feature_grid_from(to_tensor(m)), IoError);
    CHECK_THROWS_AS(rgb_image_from(to_tensor(g)), IoError);
}

TEST_CASE("slice_windows cuts aligned windows") {
    FeatureGrid img(8, 10, 1);
    for (Index i = 0; i < 80; ++i)
        img.matrix()(i, 0) = double(i);
    const WindowPlan p = plan_windows(64, 80, 32, 16, 8);
    const auto w = slice_windows(img, p);
    REQUIRE(w.size() == static_cast<std::size_t>(p.size()));
    for (std::size_t k = 0; k < w.size(); ++k)
        for (Index y = 0; y < 4; ++y)
            for (Index x = 0; x < 4; ++x)
                CHECK(w[k](y, x, 0) == img(p.windows[k].y0 / 8 + y, p.windows[k].x0 / 8 + x, 0));
    CHECK_THROWS(slice_windows(img, plan_windows(60, 80, 32, 16, 8)));
}

TEST_CASE("render writes an indexed PNG with the fixed palette") {
    LabelMap m(3, 4);
    for (Index i = 0; i < 12; ++i)
        m(i / 4, i % 4) = static_cast<std::int32_t>(i);
    m(2, 3) = 255;
    const fs::path out = scratch("labels.png");
    write_label_png(m, out);
    const RgbImage back = read_rgb_png(out);
    REQUIRE(back.height == 3);
    REQUIRE(back.width == 4);
    for (Index y = 0; y < 3; ++y)
        for (Index x = 0; x < 4; ++x) {
            const auto c = palette_color(m(y, x));
            CHECK(back.at(y, x)(0) == c[0]);
            CHECK(back.at(y, x)(1) == c[1]);
            CHECK(back.at(y, x)(2) == c[2]);
        }
    CHECK(palette_color(0) == std::array<std::uint8_t, 3>{0, 0, 0});
    CHECK(palette_color(1) == std::array<std::uint8_t, 3>{128, 0, 0});
    CHECK(palette_color(15) == std::array<std::uint8_t, 3>{192, 128, 128});
    m(0, 0) = 300;
    CHECK_THROWS_AS(write_label_png(m, out), ValidationError);
}

TEST_CASE("config overrides") {
    const PipelineConfig d;
    CHECK(d.propagation.alpha == 0.95);
    CHECK(d.patch_graph.k == 400);
    CHECK(d.patch_graph.gamma == 3.0);
    CHECK(d.patch_graph.sigma == 100.0);
    CHECK(d.pixel_graph.r == 13);
    CHECK(d.pixel_graph.tau == 0.01);
    CHECK(d.windows.win == 224);
    CHECK(d.windows.stride == 112);
    CHECK(d.short_side == 448);

    const PipelineConfig c = apply_config(d, {{"alpha", 0.5}, {"k", 10}, {"ensemble", {{"win", 336}, {"stride", 112}}},
                                              {"appearance_kernel", "exp_one_minus_s"}});
    CHECK(c.propagation.alpha == 0.5);
    CHECK(c.patch_graph.k == 10);
    CHECK(c.ensemble->win == 336);
    CHECK(c.patch_graph.appearance_kernel == AppearanceKernel::exp_one_minus_s);
    CHECK(apply_config(PipelineConfig{}, to_json(c)).ensemble->win == 336);
    CHECK(to_json(apply_config(PipelineConfig{}, to_json(c))) == to_json(c));

    CHECK_THROWS_AS(apply_config(d, {{"bogus", 1}}), ValidationError);
    CHECK_THROWS_AS(apply_config(d, {{"alpha", "high"}}), ValidationError);
    CHECK_THROWS_AS(apply_config(d, {{"alpha", 1.5}}), ValidationError);
    CHECK_THROWS_AS(apply_config(d, {{"r", 4}}), ValidationError);
    CHECK_THROWS_AS(apply_config(d, {{"spatial_kernel", "box"}}), ValidationError);
}

TEST_CASE("synthetic scenes are deterministic and well formed") {
    const fs::path a = scratch("synth_a"), b = scratch("synth_b");
    fs::remove_all(a);
    fs::remove_all(b);
    write_scene(make_scene("halves-64", 7), a);
    write_scene(make_scene("halves-64", 7), b);
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file())
            CHECK(slurp(e.path()) == slurp(b / fs::relative(e.path(), a)));

    const SynthScene halves = make_scene("halves-64", 7);
    std::set<std::int32_t> present(halves.gt.labels().data(), halves.gt.labels().data() + halves.gt.labels().size());
    CHECK(present == std::set<std::int32_t>{0, 1});

    const SynthScene noisy = make_scene("noisy-flip-10pct", 7);
    const Index np = noisy.patch_labels.height() * noisy.patch_labels.width();
    CHECK(static_cast<Index>(noisy.flipped.size()) == std::lround(0.10 * double(np)));
    Index flipped = 0;
    for (Index py = 0; py < 8; ++py)
        for (Index px = 0; px < 8; ++px) {
            Index pref;
            (noisy.vlm.cell(py, px) * noisy.classes.matrix).maxCoeff(&pref);
            flipped += pref != noisy.patch_labels(py, px);
        }
    CHECK(flipped == static_cast<Index>(noisy.flipped.size()));
    CHECK(make_scene("halves-64", 8).rgb.pixels != halves.rgb.pixels);
    CHECK_THROWS_AS(make_scene("nope", 1), ValidationError);
}

TEST_CASE("manifests resolve relative paths and require existing files") {
    const fs::path dir = scratch("manifest");
    fs::remove_all(dir);
    const SynthScene scene = make_scene("blocks-64", 1);
    const fs::path path = write_scene(scene, dir);
    const RunManifest m = load_manifest(path);
    REQUIRE(m.images.size() == 1);
    CHECK(m.images[0].gt.has_value());
    CHECK(m.num_classes() == 3);
    CHECK(load_ground_truth(m, m.images[0]) == scene.gt);
    const PipelineConfig cfg = apply_config(PipelineConfig{}, m.config);
    const ImageInputs in = load_image_inputs(m, m.images[0], cfg);
    CHECK(in.primary.vlm.size() == 9);
    CHECK(in.rgb.pixels == scene.rgb.pixels);

    PipelineConfig wrong = cfg;
    wrong.windows = {16, 16};
    CHECK_THROWS_AS(load_image_inputs(m, m.images[0], wrong), ValidationError);

    fs::remove(dir / "blocks-64" / "vm.lpt");
    try {
        load_manifest(path);
        FAIL("expected an error");
    } catch (const IoError& e) {
        CHECK(e.kind() == IoErrorKind::open_failed);
    }
    spit(dir / "broken.json", {'{', '"', 'x'});
    CHECK_THROWS_AS(load_manifest(dir / "broken.json"), ValidationError);
}
