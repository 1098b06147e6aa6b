#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace noisebench {

inline constexpr int kRawSide = 28;
inline constexpr int kCanvasSide = 56;
inline constexpr std::size_t kRawPixels = kRawSide * kRawSide;
inline constexpr std::size_t kCanvasPixels = kCanvasSide * kCanvasSide;
inline constexpr int kNumClasses = 10;

/// Row-major grayscale image, 0 = black, 255 = white. MNIST digits are
/// 28x28; the canonical canvas used by every attack and classifier is 56x56.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0);
  GrayImage(int w, int h, std::vector<std::uint8_t> data);

  std::uint8_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
  std::uint8_t& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }

  bool operator==(const GrayImage&) const = default;
};

/// Labeled images of one fixed resolution, stored contiguously.
class ImageSet {
 public:
  ImageSet() = default;
  /// Throws ContractViolation if pixels.size() != labels.size() * width * height,
  /// and CorruptDataError if a label exceeds 9.
  ImageSet(int width, int height, std::vector<std::uint8_t> pixels, std::vector<std::uint8_t> labels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  std::size_t image_pixels() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  std::span<const std::uint8_t> image(std::size_t index) const;
  GrayImage image_copy(std::size_t index) const;
  std::uint8_t label(std::size_t index) const { return labels_[index]; }

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<const std::uint8_t> labels() const noexcept { return labels_; }

  /// Images [first, first + count) as a new set.
  ImageSet slice(std::size_t first, std::size_t count) const;

  bool operator==(const ImageSet&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
  std::vector<std::uint8_t> labels_;
};

struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::span<const std::uint8_t> pixels;  // view into the parsed buffer
};

/// IDX3 image container: big-endian magic 0x00000803, count, rows, cols, then bytes.
IdxImages parse_idx_images(std::span<const std::uint8_t> bytes);

/// IDX1 label container: big-endian magic 0x00000801, count, then bytes in [0, 9].
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);

/// Nearest-neighbor 2x upscale: out(r, c) = in(r / 2, c / 2).
GrayImage upscale2x(const GrayImage& image);
ImageSet upscale2x(const ImageSet& set);

/// Parses a pair of MNIST IDX files (28x28 only) into a raw 28x28 set.
ImageSet load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels);

/// PBEN1 layout: "PBEN1", u32le count, height, width, count label bytes, pixel bytes.
std::vector<std::uint8_t> encode_imageset(const ImageSet& set);
ImageSet decode_imageset(std::span<const std::uint8_t> bytes);
void save_imageset(const ImageSet& set, const std::filesystem::path& destination);
ImageSet load_imageset(const std::filesystem::path& source);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file(const std::filesystem::path& path, std::string_view text);

/// 64-bit FNV-1a, used for dataset checksums.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t basis = 0xCBF29CE484222325ULL) noexcept;

}  // namespace noisebench
