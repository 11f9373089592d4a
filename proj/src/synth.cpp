#include "lposs/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "lposs/io.hpp"

namespace lposs {

namespace fs = std::filesystem;

namespace {

constexpr Index kSize = 64;
constexpr Index kPatch = 8;
constexpr Index kDim = 16;

// std::normal_distribution is implementation-defined; keep the bytes
// identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0)
            u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t below(std::uint64_t n) { return engine_() % n; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

struct Layout {
    Index classes;
    double flip_fraction;
    std::function<std::int32_t(Index, Index)> label;
};

Layout layout_for(const std::string& name) {
    if (name == "halves-64")
        return {2, 0.0, [](Index, Index x) { return x < 32 ? 0 : 1; }};
    if (name == "noisy-flip-10pct")
        return {2, 0.1, [](Index y, Index x) { return double(x) + 0.5 < 22.0 + 0.3 * (double(y) + 0.5) ? 0 : 1; }};
    if (name == "blocks-64")
        return {3, 0.0, [](Index y, Index x) { return static_cast<std::int32_t>((y / 16 + x / 16) % 3); }};
    if (name == "diagonal-64")
        return {2, 0.0, [](Index y, Index x) { return x > y ? 1 : 0; }};
    throw ValidationError("unknown synth scenario '" + name + "'");
}

constexpr std::array<std::array<double, 3>, 3> kColors{{{200, 60, 50}, {40, 90, 200}, {60, 170, 70}}};

Eigen::VectorXd unit(Index i) { return Eigen::VectorXd::Unit(kDim, i); }

} // namespace

WindowPlan SynthScene::plan() const {
    return plan_windows(rgb.height, rgb.width, config.at("win").get<Index>(), config.at("stride").get<Index>(),
                        config.at("patch").get<Index>());
}

WindowInputs SynthScene::window_inputs() const {
    const WindowPlan p = plan();
    WindowInputs in;
    in.vlm = slice_windows(vlm, p);
    in.vm = slice_windows(vm, p);
    return in;
}

const std::vector<std::string>& synth_scenarios() {
    static const std::vector<std::string> names{"halves-64", "noisy-flip-10pct", "blocks-64", "diagonal-64"};
    return names;
}

SynthScene make_scene(const std::string& scenario, std::uint64_t seed) {
    const Layout layout = layout_for(scenario);
    Rng rng(seed);

    SynthScene s;
    s.name = scenario;
    s.seed = seed;
    s.gt = LabelMap(kSize, kSize);
    for (Index y = 0; y < kSize; ++y)
        for (Index x = 0; x < kSize; ++x)
            s.gt(y, x) = layout.label(y, x);

    s.rgb = RgbImage(kSize, kSize);
    for (Index y = 0; y < kSize; ++y) {
        for (Index x = 0; x < kSize; ++x) {
            const auto& c = kColors[static_cast<std::size_t>(s.gt(y, x))];
            for (Index ch = 0; ch < 3; ++ch) {
                const double v = std::round(c[static_cast<std::size_t>(ch)] + 4.0 * rng.normal());
                s.rgb.at(y, x)(ch) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
            }
        }
    }

    s.classes.matrix.resize(kDim, layout.classes);
    for (Index c = 0; c < layout.classes; ++c) {
        s.classes.matrix.col(c) = unit(8 + c);
        s.classes.names.push_back("class" + std::to_string(c));
    }

    s.patch_labels = label_downsample(s.gt, kPatch);
    const Index ny = s.patch_labels.height();
    const Index nx = s.patch_labels.width();
    const Index n = ny * nx;

    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        order[static_cast<std::size_t>(i)] = i;
    for (Index i = n - 1; i > 0; --i)
        std::swap(order[static_cast<std::size_t>(i)],
                  order[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
    const auto flips = static_cast<Index>(std::lround(layout.flip_fraction * static_cast<double>(n)));
    s.flipped.assign(order.begin(), order.begin() + flips);
    std::sort(s.flipped.begin(), s.flipped.end());
    std::vector<bool> is_flipped(static_cast<std::size_t>(n), false);
    for (Index i : s.flipped)
        is_flipped[static_cast<std::size_t>(i)] = true;

    s.vm = FeatureGrid(ny, nx, kDim);
    s.vlm = FeatureGrid(ny, nx, kDim);
    for (Index py = 0; py < ny; ++py) {
        for (Index px = 0; px < nx; ++px) {
            const Index i = py * nx + px;
            const Index label = s.patch_labels(py, px);
            Index preferred = label;
            Index other = (label + 1) % layout.classes;
            if (is_flipped[static_cast<std::size_t>(i)])
                std::swap(preferred, other);

            Eigen::VectorXd vm = unit(label);
            for (Index k = 0; k < kDim; ++k)
                vm(k) += 0.05 * rng.normal();
            Eigen::VectorXd vlm = 0.6 * s.classes.matrix.col(preferred) + 0.4 * s.classes.matrix.col(other);
            for (Index k = 0; k < kDim; ++k)
                vlm(k) += 0.05 * rng.normal();
            s.vm.cell(py, px) = vm.normalized().transpose();
            s.vlm.cell(py, px) = vlm.normalized().transpose();
        }
    }

    s.config = {{"patch", kPatch}, {"win", 32}, {"stride", 16}, {"short_side", 0}, {"k", 100}};
    return s;
}

fs::path write_scene(const SynthScene& scene, const fs::path& dir) {
    fs::create_directories(dir / scene.name);
    const fs::path img = dir / scene.name;
    const WindowInputs in = scene.window_inputs();

    write_tensor(to_tensor(scene.rgb), img / "rgb.lpt");
    write_tensor(to_tensor(scene.gt), img / "gt.lpt");
    write_tensor(to_tensor(in.vlm), img / "vlm.lpt");
    write_tensor(to_tensor(in.vm), img / "vm.lpt");
    write_tensor(to_tensor(scene.classes), dir / "classes.lpt");

    RunManifest m;
    m.class_embeddings = dir / "classes.lpt";
    m.class_names = scene.classes.names;
    m.config = scene.config;
    ImageEntry e;
    e.id = scene.name;
    e.rgb = img / "rgb.lpt";
    e.gt = img / "gt.lpt";
    e.primary.vlm = img / "vlm.lpt";
    e.primary.vm = img / "vm.lpt";
    m.images.push_back(std::move(e));

    const fs::path path = dir / "manifest.json";
    save_manifest(m, path);
    return path;
}

} // namespace lposs
