#include "lposs/io.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <iterator>

#include <png.h>
#include <zlib.h>

namespace lposs {

const char* to_string(IoErrorKind kind) {
    switch (kind) {
    case IoErrorKind::open_failed: return "open failed";
    case IoErrorKind::bad_magic: return "bad magic";
    case IoErrorKind::bad_version: return "unsupported version";
    case IoErrorKind::bad_dtype: return "bad dtype";
    case IoErrorKind::truncated: return "length mismatch";
    case IoErrorKind::crc_mismatch: return "CRC mismatch";
    case IoErrorKind::shape_mismatch: return "shape mismatch";
    }
    return "io error";
}

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'L', 'P', 'T', '1'};

std::size_t dtype_size(DType t) {
    switch (t) {
    case DType::f32: return 4;
    case DType::u8: return 1;
    case DType::i32: return 4;
    }
    return 0;
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    using U = std::make_unsigned_t<T>;
    const U u = static_cast<U>(value);
    for (std::size_t b = 0; b < sizeof(T); ++b)
        out.push_back(static_cast<std::uint8_t>((u >> (8 * b)) & 0xFF));
}

template <typename U>
U get_le(const std::uint8_t* p) {
    U v = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b)
        v |= static_cast<U>(static_cast<U>(p[b]) << (8 * b));
    return v;
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    const std::uint8_t* take(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n)
            throw IoError(IoErrorKind::truncated, std::string("file ends inside the ") + what);
        const std::uint8_t* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

std::uint64_t product(const std::vector<std::uint64_t>& shape) {
    std::uint64_t n = 1;
    for (auto d : shape)
        n *= d;
    return n;
}

void expect_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.shape.size() != rank)
        throw IoError(IoErrorKind::shape_mismatch, std::string(what) + " needs a rank-" + std::to_string(rank) +
                                                        " tensor, got rank " + std::to_string(t.shape.size()));
}

Index dim(const Tensor& t, std::size_t i) { return static_cast<Index>(t.shape[i]); }

} // namespace

std::size_t Tensor::elements() const {
    return std::visit([](const auto& v) { return v.size(); }, data);
}

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    while (size > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
        crc = ::crc32(crc, data, chunk);
        data += chunk;
        size -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor) {
    if (product(tensor.shape) != tensor.elements())
        throw IoError(IoErrorKind::shape_mismatch, "tensor shape does not match its element count");

    std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
    put_le<std::uint32_t>(out, kTensorVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.dtype()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.shape.size()));
    for (auto d : tensor.shape)
        put_le<std::uint64_t>(out, d);

    const std::size_t payload_start = out.size();
    std::visit(
        [&](const auto& values) {
            using T = typename std::decay_t<decltype(values)>::value_type;
            out.reserve(out.size() + values.size() * sizeof(T) + 4);
            for (const T v : values) {
                if constexpr (std::is_same_v<T, float>)
                    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
                else
                    put_le<T>(out, v);
            }
        },
        tensor.data);
    put_le<std::uint32_t>(out, crc32_of(out.data() + payload_start, out.size() - payload_start));
    return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
    Reader in(bytes);
    const std::uint8_t* magic = in.take(4, "magic");
    if (!std::equal(kMagic.begin(), kMagic.end(), magic))
        throw IoError(IoErrorKind::bad_magic, "not a tensor container");
    const auto version = get_le<std::uint32_t>(in.take(4, "header"));
    if (version != kTensorVersion)
        throw IoError(IoErrorKind::bad_version, "version " + std::to_string(version));
    const auto dtype_code = get_le<std::uint32_t>(in.take(4, "header"));
    if (dtype_code > 2)
        throw IoError(IoErrorKind::bad_dtype, "dtype code " + std::to_string(dtype_code));
    const auto dtype = static_cast<DType>(dtype_code);
    const auto ndim = get_le<std::uint32_t>(in.take(4, "header"));

    Tensor t;
    for (std::uint32_t i = 0; i < ndim; ++i)
        t.shape.push_back(get_le<std::uint64_t>(in.take(8, "dims")));

    const std::uint64_t count = product(t.shape);
    const std::size_t esize = dtype_size(dtype);
    if (count > (in.remaining() / esize))
        throw IoError(IoErrorKind::truncated, "payload shorter than the declared shape");
    const std::size_t payload_bytes = static_cast<std::size_t>(count) * esize;
    if (in.remaining() != payload_bytes + 4)
        throw IoError(IoErrorKind::truncated, "expected " + std::to_string(payload_bytes + 4) +
                                                  " bytes after the header, found " +
                                                  std::to_string(in.remaining()));
    const std::uint8_t* payload = in.take(payload_bytes, "payload");
    const auto stored_crc = get_le<std::uint32_t>(in.take(4, "checksum"));
    if (crc32_of(payload, payload_bytes) != stored_crc)
        throw IoError(IoErrorKind::crc_mismatch, "payload checksum does not match");

    const auto n = static_cast<std::size_t>(count);
    switch (dtype) {
    case DType::f32: {
        std::vector<float> v(n);
        for (std::size_t i = 0; i < n; ++i)
            v[i] = std::bit_cast<float>(get_le<std::uint32_t>(payload + 4 * i));
        t.data = std::move(v);
        break;
    }
    case DType::u8:
        t.data = std::vector<std::uint8_t>(payload, payload + n);
        break;
    case DType::i32: {
        std::vector<std::int32_t> v(n);
        for (std::size_t i = 0; i < n; ++i)
            v[i] = static_cast<std::int32_t>(get_le<std::uint32_t>(payload + 4 * i));
        t.data = std::move(v);
        break;
    }
    }
    return t;
}

Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError(IoErrorKind::open_failed, path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    try {
        return decode_tensor(bytes);
    } catch (const IoError& e) {
        throw IoError(e.kind(), path.string() + ": " + e.detail());
    }
}

void write_tensor(const Tensor& tensor, const std::filesystem::path& path) {
    const auto bytes = encode_tensor(tensor);
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw IoError(IoErrorKind::open_failed, path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f)
        throw IoError(IoErrorKind::open_failed, "write failed: " + path.string());
}

namespace {

template <typename Kind>
Tensor grid_to_tensor(const Grid<double, Kind>& g) {
    Tensor t;
    t.shape = {static_cast<std::uint64_t>(g.height()), static_cast<std::uint64_t>(g.width()),
               static_cast<std::uint64_t>(g.channels())};
    std::vector<float> v(static_cast<std::size_t>(g.matrix().size()));
    Eigen::Map<RowMatrix<float>>(v.data(), g.cells(), g.channels()) = g.matrix().template cast<float>();
    t.data = std::move(v);
    return t;
}

template <typename GridT>
GridT grid_from_tensor(const Tensor& t, const char* what) {
    expect_rank(t, 3, what);
    const auto& v = t.values<float>();
    const Index h = dim(t, 0), w = dim(t, 1), c = dim(t, 2);
    typename GridT::Storage m =
        Eigen::Map<const RowMatrix<float>>(v.data(), h * w, c).template cast<double>();
    return GridT(h, w, std::move(m));
}

template <typename GridT>
std::vector<GridT> windows_from_tensor(const Tensor& t, const char* what) {
    expect_rank(t, 4, what);
    const auto& v = t.values<float>();
    const Index k = dim(t, 0), h = dim(t, 1), w = dim(t, 2), c = dim(t, 3);
    std::vector<GridT> out;
    for (Index i = 0; i < k; ++i) {
        typename GridT::Storage m =
            Eigen::Map<const RowMatrix<float>>(v.data() + i * h * w * c, h * w, c).template cast<double>();
        out.emplace_back(h, w, std::move(m));
    }
    return out;
}

} // namespace

Tensor to_tensor(const FeatureGrid& grid) { return grid_to_tensor(grid); }
Tensor to_tensor(const ScoreGrid& grid) { return grid_to_tensor(grid); }

Tensor to_tensor(const LabelMap& map) {
    Tensor t;
    t.shape = {static_cast<std::uint64_t>(map.height()), static_cast<std::uint64_t>(map.width())};
    t.data = std::vector<std::int32_t>(map.labels().data(), map.labels().data() + map.labels().size());
    return t;
}

Tensor to_tensor(const RgbImage& image) {
    Tensor t;
    t.shape = {static_cast<std::uint64_t>(image.height), static_cast<std::uint64_t>(image.width), 3};
    t.data = std::vector<std::uint8_t>(image.pixels.data(), image.pixels.data() + image.pixels.size());
    return t;
}

Tensor to_tensor(const std::vector<FeatureGrid>& windows) {
    if (windows.empty())
        throw IoError(IoErrorKind::shape_mismatch, "no windows to write");
    const auto& f = windows.front();
    Tensor t;
    t.shape = {windows.size(), static_cast<std::uint64_t>(f.height()), static_cast<std::uint64_t>(f.width()),
               static_cast<std::uint64_t>(f.channels())};
    std::vector<float> v;
    v.reserve(static_cast<std::size_t>(product(t.shape)));
    for (const auto& g : windows) {
        if (g.height() != f.height() || g.width() != f.width() || g.channels() != f.channels())
            throw IoError(IoErrorKind::shape_mismatch, "window grids differ in shape");
        for (Index i = 0; i < g.cells(); ++i)
            for (Index c = 0; c < g.channels(); ++c)
                v.push_back(static_cast<float>(g.matrix()(i, c)));
    }
    t.data = std::move(v);
    return t;
}

Tensor to_tensor(const ClassEmbeddings& classes) {
    Tensor t;
    t.shape = {static_cast<std::uint64_t>(classes.classes()), static_cast<std::uint64_t>(classes.dim())};
    std::vector<float> v(static_cast<std::size_t>(classes.matrix.size()));
    Eigen::Map<RowMatrix<float>>(v.data(), classes.classes(), classes.dim()) =
        classes.matrix.transpose().cast<float>();
    t.data = std::move(v);
    return t;
}

FeatureGrid feature_grid_from(const Tensor& t) { return grid_from_tensor<FeatureGrid>(t, "feature grid"); }
ScoreGrid score_grid_from(const Tensor& t) { return grid_from_tensor<ScoreGrid>(t, "score grid"); }

LabelMap label_map_from(const Tensor& t, std::int32_t ignore_label) {
    expect_rank(t, 2, "label map");
    LabelMap map(dim(t, 0), dim(t, 1), 0, ignore_label);
    if (t.dtype() == DType::i32) {
        const auto& v = t.values<std::int32_t>();
        std::copy(v.begin(), v.end(), map.labels().data());
    } else if (t.dtype() == DType::u8) {
        const auto& v = t.values<std::uint8_t>();
        std::copy(v.begin(), v.end(), map.labels().data());
    } else {
        throw IoError(IoErrorKind::bad_dtype, "label maps must be i32 or u8");
    }
    return map;
}

RgbImage rgb_image_from(const Tensor& t) {
    expect_rank(t, 3, "RGB image");
    if (t.shape[2] != 3)
        throw IoError(IoErrorKind::shape_mismatch, "RGB image needs 3 channels");
    const auto& v = t.values<std::uint8_t>();
    RgbImage img(dim(t, 0), dim(t, 1));
    std::copy(v.begin(), v.end(), img.pixels.data());
    return img;
}

std::vector<FeatureGrid> window_features_from(const Tensor& t) {
    return windows_from_tensor<FeatureGrid>(t, "per-window features");
}

std::vector<ScoreGrid> window_scores_from(const Tensor& t) {
    return windows_from_tensor<ScoreGrid>(t, "per-window scores");
}

ClassEmbeddings class_embeddings_from(const Tensor& t) {
    expect_rank(t, 2, "class embeddings");
    const auto& v = t.values<float>();
    ClassEmbeddings ce;
    ce.matrix = Eigen::Map<const RowMatrix<float>>(v.data(), dim(t, 0), dim(t, 1)).transpose().cast<double>();
    return ce;
}

std::vector<FeatureGrid> slice_windows(const FeatureGrid& image_patches, const WindowPlan& plan) {
    std::vector<FeatureGrid> out;
    for (const auto& o : plan.windows) {
        if (o.y0 % plan.patch != 0 || o.x0 % plan.patch != 0)
            throw ValidationError("window origin (" + std::to_string(o.y0) + ", " + std::to_string(o.x0) +
                                  ") is not aligned to the patch grid");
        const Index py0 = o.y0 / plan.patch, px0 = o.x0 / plan.patch;
        if (py0 + plan.patch_rows() > image_patches.height() || px0 + plan.patch_cols() > image_patches.width())
            throw ValidationError("window extends past the image patch grid");
        FeatureGrid g(plan.patch_rows(), plan.patch_cols(), image_patches.channels());
        for (Index y = 0; y < plan.patch_rows(); ++y)
            for (Index x = 0; x < plan.patch_cols(); ++x)
                g.cell(y, x) = image_patches.cell(py0 + y, px0 + x);
        out.push_back(std::move(g));
    }
    return out;
}

std::array<std::uint8_t, 3> palette_color(std::int32_t label) {
    // Pascal VOC colormap: bits of the label spread over the channels.
    std::array<std::uint8_t, 3> rgb{0, 0, 0};
    int id = label & 0xFF;
    for (int shift = 7; shift >= 0 && id != 0; --shift) {
        rgb[0] = static_cast<std::uint8_t>(rgb[0] | (((id >> 0) & 1) << shift));
        rgb[1] = static_cast<std::uint8_t>(rgb[1] | (((id >> 1) & 1) << shift));
        rgb[2] = static_cast<std::uint8_t>(rgb[2] | (((id >> 2) & 1) << shift));
        id >>= 3;
    }
    return rgb;
}

void write_label_png(const LabelMap& labels, const std::filesystem::path& path) {
    std::vector<std::uint8_t> indices(static_cast<std::size_t>(labels.labels().size()));
    for (Index y = 0; y < labels.height(); ++y)
        for (Index x = 0; x < labels.width(); ++x) {
            const std::int32_t l = labels(y, x);
            std::uint8_t idx = 255;
            if (l != labels.ignore_label()) {
                if (l < 0 || l > 254)
                    throw ValidationError("label " + std::to_string(l) + " does not fit an 8-bit palette");
                idx = static_cast<std::uint8_t>(l);
            }
            indices[static_cast<std::size_t>(y * labels.width() + x)] = idx;
        }
    std::array<std::uint8_t, 256 * 3> colormap{};
    for (int i = 0; i < 256; ++i) {
        const auto c = palette_color(i);
        std::copy(c.begin(), c.end(), colormap.begin() + 3 * i);
    }

    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(labels.width());
    image.height = static_cast<png_uint_32>(labels.height());
    image.format = PNG_FORMAT_RGB_COLORMAP;
    image.colormap_entries = 256;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, indices.data(), 0, colormap.data()))
        throw IoError(IoErrorKind::open_failed, path.string() + ": " + image.message);
}

RgbImage read_rgb_png(const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str()))
        throw IoError(IoErrorKind::open_failed, path.string() + ": " + image.message);
    image.format = PNG_FORMAT_RGB;
    RgbImage out(static_cast<Index>(image.height), static_cast<Index>(image.width));
    if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
        png_image_free(&image);
        throw IoError(IoErrorKind::open_failed, path.string() + ": " + image.message);
    }
    return out;
}

} // namespace lposs
