#include "core/image.hpp"

#include <fstream>

#include "core/error.hpp"

namespace omniact {

Image::Image(int w, int h, int ch) : width(w), height(h), channels(ch) {
  if (w < 1 || h < 1 || (ch != 1 && ch != 3)) {
    throw_invalid("image dimensions must be positive with 1 or 3 channels");
  }
  pixels.assign(static_cast<size_t>(w) * h * ch, 0);
}

namespace {

// Reads one whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

int parse_dim(const std::string& tok, const std::string& path) {
  try {
    size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size() || v < 1) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw_io(path + ": malformed PNM header token '" + tok + "'");
  }
}

}  // namespace

Image read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open image file: " + path);

  const std::string magic = next_token(in);
  int channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw_io(path + ": unsupported PNM magic '" + magic + "' (need P5 or P6)");
  }

  const int w = parse_dim(next_token(in), path);
  const int h = parse_dim(next_token(in), path);
  const int maxval = parse_dim(next_token(in), path);
  if (maxval != 255) {
    throw_io(path + ": only 8-bit PNM supported (maxval 255)");
  }
  if (static_cast<int64_t>(w) * h > (int64_t{1} << 30)) {
    throw_io(path + ": unreasonable image size");
  }

  Image img(w, h, channels);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw_io(path + ": truncated pixel data");
  }
  return img;
}

void write_pnm(const Image& img, const std::string& path) {
  if (img.width < 1 || img.height < 1 ||
      img.pixels.size() !=
          static_cast<size_t>(img.width) * img.height * img.channels) {
    throw_invalid("cannot write malformed image");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot open image file for writing: " + path);
  out << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw_io("failed writing image: " + path);
}

}  // namespace omniact
