#include "lposs/grid.hpp"

#include <map>

namespace lposs {

namespace {

double srgb_to_linear(std::uint8_t v) {
    const double c = static_cast<double>(v) / 255.0;
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
    constexpr double delta = 6.0 / 29.0;
    return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

} // namespace

FeatureGrid srgb_to_lab(const RgbImage& image) {
    // D65 reference white
    constexpr double xn = 0.95047, yn = 1.0, zn = 1.08883;

    FeatureGrid out(image.height, image.width, 3);
    auto& m = out.matrix();
    for (Index i = 0; i < image.pixels.rows(); ++i) {
        const double r = srgb_to_linear(image.pixels(i, 0));
        const double g = srgb_to_linear(image.pixels(i, 1));
        const double b = srgb_to_linear(image.pixels(i, 2));

        const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
        const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
        const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;

        const double fx = lab_f(x / xn), fy = lab_f(y / yn), fz = lab_f(z / zn);
        const double l = 116.0 * fy - 16.0;
        const double a = 500.0 * (fx - fy);
        const double bb = 200.0 * (fy - fz);

        m(i, 0) = l / 100.0;
        m(i, 1) = (a + 128.0) / 255.0;
        m(i, 2) = (bb + 128.0) / 255.0;
    }
    return out;
}

LabelMap label_downsample(const LabelMap& map, Index factor) {
    if (factor < 1)
        throw ValidationError("label_downsample factor must be >= 1");
    const Index out_h = (map.height() + factor - 1) / factor;
    const Index out_w = (map.width() + factor - 1) / factor;
    const std::int32_t ignore = map.ignore_label();

    LabelMap out(out_h, out_w, ignore, ignore);
    std::map<std::int32_t, Index> votes; // ordered: first max wins the tie
    for (Index by = 0; by < out_h; ++by) {
        for (Index bx = 0; bx < out_w; ++bx) {
            votes.clear();
            const Index y_end = std::min((by + 1) * factor, map.height());
            const Index x_end = std::min((bx + 1) * factor, map.width());
            for (Index y = by * factor; y < y_end; ++y)
                for (Index x = bx * factor; x < x_end; ++x)
                    if (map(y, x) != ignore)
                        ++votes[map(y, x)];
            Index best = 0;
            for (const auto& [label, count] : votes) {
                if (count > best) {
                    best = count;
                    out(by, bx) = label;
                }
            }
        }
    }
    return out;
}

LabelMap label_upsample_nearest(const LabelMap& map, Index out_h, Index out_w) {
    if (out_h < 1 || out_w < 1)
        throw ValidationError("label_upsample_nearest output size must be positive");
    if (map.height() < 1 || map.width() < 1)
        throw ValidationError("label_upsample_nearest input map is empty");
    LabelMap out(out_h, out_w, 0, map.ignore_label());
    for (Index y = 0; y < out_h; ++y) {
        const Index sy = detail::nearest_tap(y, map.height(), out_h);
        for (Index x = 0; x < out_w; ++x)
            out(y, x) = map(sy, detail::nearest_tap(x, map.width(), out_w));
    }
    return out;
}

} // namespace lposs
