#include "noisebench/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "noisebench/errors.hpp"

namespace noisebench {
namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
constexpr std::string_view kPbenMagic = "PBEN1";
constexpr std::size_t kPbenHeader = kPbenMagic.size() + 3 * sizeof(std::uint32_t);

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t offset) {
  return (std::uint32_t{b[offset]} << 24) | (std::uint32_t{b[offset + 1]} << 16) |
         (std::uint32_t{b[offset + 2]} << 8) | std::uint32_t{b[offset + 3]};
}

std::uint32_t read_le32(std::span<const std::uint8_t> b, std::size_t offset) {
  return std::uint32_t{b[offset]} | (std::uint32_t{b[offset + 1]} << 8) |
         (std::uint32_t{b[offset + 2]} << 16) | (std::uint32_t{b[offset + 3]} << 24);
}

void append_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

void check_labels(std::span<const std::uint8_t> labels, std::string_view what) {
  auto bad = std::find_if(labels.begin(), labels.end(), [](std::uint8_t l) { return l > 9; });
  if (bad != labels.end()) {
    throw CorruptDataError(fmt::format("{}: label {} out of range [0,9]", what, *bad),
                           static_cast<std::size_t>(bad - labels.begin()));
  }
}

}  // namespace

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {
  if (w < 0 || h < 0) throw ContractViolation("GrayImage: negative dimension");
}

GrayImage::GrayImage(int w, int h, std::vector<std::uint8_t> data)
    : width(w), height(h), pixels(std::move(data)) {
  if (w < 0 || h < 0 || pixels.size() != static_cast<std::size_t>(w) * h) {
    throw ContractViolation(
        fmt::format("GrayImage: {} pixels do not fill {}x{}", pixels.size(), w, h));
  }
}

ImageSet::ImageSet(int width, int height, std::vector<std::uint8_t> pixels,
                   std::vector<std::uint8_t> labels)
    : width_(width), height_(height), pixels_(std::move(pixels)), labels_(std::move(labels)) {
  if (width_ <= 0 || height_ <= 0) {
    throw ContractViolation(fmt::format("ImageSet: invalid resolution {}x{}", width_, height_));
  }
  if (pixels_.size() != labels_.size() * image_pixels()) {
    throw ContractViolation(fmt::format("ImageSet: {} pixel bytes for {} images of {}x{}",
                                        pixels_.size(), labels_.size(), width_, height_));
  }
  check_labels(labels_, "ImageSet");
}

std::span<const std::uint8_t> ImageSet::image(std::size_t index) const {
  if (index >= size()) {
    throw ContractViolation(fmt::format("ImageSet: index {} out of range ({})", index, size()));
  }
  return std::span<const std::uint8_t>(pixels_).subspan(index * image_pixels(), image_pixels());
}

GrayImage ImageSet::image_copy(std::size_t index) const {
  auto px = image(index);
  return GrayImage(width_, height_, std::vector<std::uint8_t>(px.begin(), px.end()));
}

ImageSet ImageSet::slice(std::size_t first, std::size_t count) const {
  if (first > size() || count > size() - first) {
    throw ContractViolation(
        fmt::format("ImageSet: slice [{}, {}) exceeds {}", first, first + count, size()));
  }
  auto px = std::span<const std::uint8_t>(pixels_).subspan(first * image_pixels(), count * image_pixels());
  auto lb = std::span<const std::uint8_t>(labels_).subspan(first, count);
  return ImageSet(width_, height_, {px.begin(), px.end()}, {lb.begin(), lb.end()});
}

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) {
    throw LengthError("IDX image header", 16, bytes.size());
  }
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kIdxImageMagic) {
    throw FormatError(fmt::format("IDX image file: bad magic 0x{:08X} (expected 0x{:08X})", magic,
                                  kIdxImageMagic));
  }
  IdxImages out;
  out.count = read_be32(bytes, 4);
  out.rows = read_be32(bytes, 8);
  out.cols = read_be32(bytes, 12);
  const unsigned __int128 expected =
      static_cast<unsigned __int128>(out.count) * out.rows * out.cols;
  const std::size_t available = bytes.size() - 16;
  if (expected > available) {
    throw LengthError("IDX image payload",
                      expected > SIZE_MAX ? SIZE_MAX : static_cast<std::size_t>(expected), available);
  }
  out.pixels = bytes.subspan(16, static_cast<std::size_t>(expected));
  return out;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) {
    throw LengthError("IDX label header", 8, bytes.size());
  }
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kIdxLabelMagic) {
    throw FormatError(fmt::format("IDX label file: bad magic 0x{:08X} (expected 0x{:08X})", magic,
                                  kIdxLabelMagic));
  }
  const std::uint32_t count = read_be32(bytes, 4);
  if (count > bytes.size() - 8) {
    throw LengthError("IDX label payload", count, bytes.size() - 8);
  }
  auto payload = bytes.subspan(8, count);
  check_labels(payload, "IDX label file");
  return {payload.begin(), payload.end()};
}

GrayImage upscale2x(const GrayImage& image) {
  GrayImage out(image.width * 2, image.height * 2);
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      out.at(r, c) = image.at(r / 2, c / 2);
    }
  }
  return out;
}

ImageSet upscale2x(const ImageSet& set) {
  const int w = set.width();
  const int h = set.height();
  std::vector<std::uint8_t> pixels;
  pixels.reserve(set.size() * set.image_pixels() * 4);
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto src = set.image(i);
    for (int r = 0; r < 2 * h; ++r) {
      const auto* row = src.data() + static_cast<std::size_t>(r / 2) * w;
      for (int c = 0; c < 2 * w; ++c) {
        pixels.push_back(row[c / 2]);
      }
    }
  }
  auto labels = set.labels();
  return ImageSet(2 * w, 2 * h, std::move(pixels), {labels.begin(), labels.end()});
}

ImageSet load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto image_bytes = read_file(images);
  const auto label_bytes = read_file(labels);
  const IdxImages idx = parse_idx_images(image_bytes);
  auto lbl = parse_idx_labels(label_bytes);
  if (idx.rows != kRawSide || idx.cols != kRawSide) {
    throw FormatError(fmt::format("{}: expected 28x28 images, found {}x{}", images.string(),
                                  idx.rows, idx.cols));
  }
  if (lbl.size() != idx.count) {
    throw FormatError(fmt::format("image count {} does not match label count {}", idx.count,
                                  lbl.size()));
  }
  return ImageSet(kRawSide, kRawSide, {idx.pixels.begin(), idx.pixels.end()}, std::move(lbl));
}

std::vector<std::uint8_t> encode_imageset(const ImageSet& set) {
  std::vector<std::uint8_t> out;
  out.reserve(kPbenHeader + set.size() + set.pixels().size());
  out.insert(out.end(), kPbenMagic.begin(), kPbenMagic.end());
  append_le32(out, static_cast<std::uint32_t>(set.size()));
  append_le32(out, static_cast<std::uint32_t>(set.height()));
  append_le32(out, static_cast<std::uint32_t>(set.width()));
  out.insert(out.end(), set.labels().begin(), set.labels().end());
  out.insert(out.end(), set.pixels().begin(), set.pixels().end());
  return out;
}

ImageSet decode_imageset(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPbenMagic.size() ||
      !std::equal(kPbenMagic.begin(), kPbenMagic.end(), bytes.begin())) {
    throw FormatError("PBEN1: missing magic");
  }
  if (bytes.size() < kPbenHeader) {
    throw LengthError("PBEN1 header", kPbenHeader, bytes.size());
  }
  const std::uint32_t count = read_le32(bytes, 5);
  const std::uint32_t height = read_le32(bytes, 9);
  const std::uint32_t width = read_le32(bytes, 13);
  if (width == 0 || height == 0 || width > 65535 || height > 65535) {
    throw FormatError(fmt::format("PBEN1: invalid resolution {}x{}", width, height));
  }
  const unsigned __int128 expected =
      kPbenHeader + static_cast<unsigned __int128>(count) * (1 + std::uint64_t{width} * height);
  if (expected != bytes.size()) {
    throw LengthError("PBEN1 payload",
                      expected > SIZE_MAX ? SIZE_MAX : static_cast<std::size_t>(expected), bytes.size());
  }
  auto labels = bytes.subspan(kPbenHeader, count);
  check_labels(labels, "PBEN1");
  auto pixels = bytes.subspan(kPbenHeader + count);
  return ImageSet(static_cast<int>(width), static_cast<int>(height), {pixels.begin(), pixels.end()},
                  {labels.begin(), labels.end()});
}

void save_imageset(const ImageSet& set, const std::filesystem::path& destination) {
  write_file(destination, encode_imageset(set));
}

ImageSet load_imageset(const std::filesystem::path& source) {
  return decode_imageset(read_file(source));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
  }
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw IoError(fmt::format("read error on '{}'", path.string()));
  }
  return data;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError(fmt::format("write error on '{}'", path.string()));
  }
}

void write_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                                 text.size()));
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t basis) noexcept {
  std::uint64_t h = basis;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace noisebench
