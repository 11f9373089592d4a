// io.hpp
//
// Single-tensor container files:
//
//   "LPT1" | version u32 | dtype u32 | ndim u32 | dims u64 x ndim |
//   payload (row-major) | CRC32 of payload u32
//
// All integers and payload values are little-endian. dtype: 0 = f32,
// 1 = u8, 2 = i32.

#ifndef LPOSS_IO_HPP
#define LPOSS_IO_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "lposs/grid.hpp"
#include "lposs/pipeline.hpp"
#include "lposs/windows.hpp"

namespace lposs {

inline constexpr std::uint32_t kTensorVersion = 1;

enum class DType : std::uint32_t { f32 = 0, u8 = 1, i32 = 2 };

enum class IoErrorKind {
    open_failed,
    bad_magic,
    bad_version,
    bad_dtype,
    truncated, // shorter or longer than the header implies
    crc_mismatch,
    shape_mismatch,
};

const char* to_string(IoErrorKind kind);

class IoError : public std::runtime_error {
public:
    IoError(IoErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}
    IoErrorKind kind() const noexcept { return kind_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    IoErrorKind kind_;
    std::string detail_;
};

struct Tensor {
    using Data = std::variant<std::vector<float>, std::vector<std::uint8_t>, std::vector<std::int32_t>>;

    std::vector<std::uint64_t> shape;
    Data data;

    DType dtype() const noexcept { return static_cast<DType>(data.index()); }
    std::size_t elements() const;

    template <typename T>
    const std::vector<T>& values() const {
        if (const auto* v = std::get_if<std::vector<T>>(&data))
            return *v;
        throw IoError(IoErrorKind::bad_dtype, "tensor holds a different element type");
    }
};

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor);
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes);

Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const Tensor& tensor, const std::filesystem::path& path);

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size);

// Conversions between tensors and the in-memory grid types.

Tensor to_tensor(const FeatureGrid& grid);  // [H, W, d] f32
Tensor to_tensor(const ScoreGrid& grid);    // [H, W, C] f32
Tensor to_tensor(const LabelMap& map);      // [H, W] i32
Tensor to_tensor(const RgbImage& image);    // [H, W, 3] u8
Tensor to_tensor(const std::vector<FeatureGrid>& windows); // [K, Ny, Nx, d] f32
Tensor to_tensor(const ClassEmbeddings& classes);           // [C, d] f32

FeatureGrid feature_grid_from(const Tensor& t);
ScoreGrid score_grid_from(const Tensor& t);
LabelMap label_map_from(const Tensor& t, std::int32_t ignore_label = kDefaultIgnoreLabel); // i32 or u8
RgbImage rgb_image_from(const Tensor& t);
std::vector<FeatureGrid> window_features_from(const Tensor& t); // [K, Ny, Nx, d]
std::vector<ScoreGrid> window_scores_from(const Tensor& t);     // [K, Ny, Nx, C]
ClassEmbeddings class_embeddings_from(const Tensor& t);         // [C, d]

/// Cuts per-window patch grids out of a whole-image patch grid. Window origins
/// must be multiples of the patch size.
std::vector<FeatureGrid> slice_windows(const FeatureGrid& image_patches, const WindowPlan& plan);

/// 8-bit indexed PNG with a fixed palette; ignore pixels get palette entry 255.
void write_label_png(const LabelMap& labels, const std::filesystem::path& path);

/// Reads an 8-bit RGB or RGBA PNG.
RgbImage read_rgb_png(const std::filesystem::path& path);

/// Fixed palette entry for a class id.
std::array<std::uint8_t, 3> palette_color(std::int32_t label);

} // namespace lposs

#endif // LPOSS_IO_HPP
