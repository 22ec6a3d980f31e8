#include "mfgrid/netpbm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "mfgrid/csv.hpp"
#include "mfgrid/errors.hpp"

namespace mfgrid {

namespace {

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  long integer(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000L) throw ParseError(std::string("netpbm: ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) {
      if (pos_ >= bytes_.size()) throw ParseError(std::string("netpbm: truncated payload, expected ") + what, pos_);
      throw ParseError(std::string("netpbm: expected ") + what, pos_);
    }
    return value;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  unsigned char byte_at(std::size_t i) const { return static_cast<unsigned char>(bytes_[i]); }
  bool at_end() const { return pos_ >= bytes_.size(); }
  char peek() const { return bytes_[pos_]; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Image decode_netpbm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw ParseError("netpbm: missing magic number", 0);
  const char kind = bytes[1];
  if (kind != '2' && kind != '3' && kind != '5' && kind != '6')
    throw ParseError(std::string("netpbm: unsupported format P") + kind, 1);
  Reader in(bytes);
  in.advance(2);
  if (!in.at_end() && !std::isspace(static_cast<unsigned char>(in.peek())) && in.peek() != '#')
    throw ParseError("netpbm: malformed header after magic number", in.pos());
  Image img;
  img.channels = (kind == '3' || kind == '6') ? 3 : 1;
  const long width = in.integer("width");
  const long height = in.integer("height");
  if (width < 1 || height < 1) throw ParseError("netpbm: image dimensions must be positive", in.pos());
  in.skip_space_and_comments();
  const std::size_t maxval_at = in.pos();
  const long maxval = in.integer("maxval");
  if (maxval != 255) throw ParseError("netpbm: unsupported maxval " + std::to_string(maxval) + " (only 255)", maxval_at);
  img.width = static_cast<int>(width);
  img.height = static_cast<int>(height);
  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
                            static_cast<std::size_t>(img.channels);
  img.data.resize(count);
  if (kind == '5' || kind == '6') {
    if (in.at_end() || !std::isspace(static_cast<unsigned char>(in.peek())))
      throw ParseError("netpbm: expected single whitespace before raster", in.pos());
    in.advance(1);
    if (in.remaining() < count)
      throw ParseError("netpbm: truncated payload, expected " + std::to_string(count) + " bytes", in.pos() + in.remaining());
    for (std::size_t i = 0; i < count; ++i) img.data[i] = in.byte_at(in.pos() + i) / 255.0;
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      in.skip_space_and_comments();
      const std::size_t at = in.pos();
      const long v = in.integer("sample");
      if (v > 255) throw ParseError("netpbm: sample exceeds maxval", at);
      img.data[i] = static_cast<double>(v) / 255.0;
    }
  }
  return img;
}

Image load_image(const std::filesystem::path& path) { return decode_netpbm(read_file(path)); }

std::uint8_t quantize(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

std::string encode_netpbm(const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw ConfigError("netpbm: only 1 or 3 channels can be encoded");
  std::string out = (image.channels == 1 ? "P5\n" : "P6\n") + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n255\n";
  out.reserve(out.size() + image.data.size());
  for (double v : image.data) out.push_back(static_cast<char>(quantize(v)));
  return out;
}

}  // namespace mfgrid
