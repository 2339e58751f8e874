#include "lampdet/image.hpp"

#include "lampdet/error.hpp"

#include <fstream>
#include <string>

namespace lampdet {

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  char c = 0;
  while (in.get(c)) {
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open image " + path.string());
  if (header_token(in) != "P5") {
    throw Error(ErrorCode::IngestError, path.string() + " is not a binary PGM (P5)");
  }
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(header_token(in));
    h = std::stoi(header_token(in));
    maxval = std::stoi(header_token(in));
  } catch (const std::exception&) {
    throw Error(ErrorCode::IngestError, path.string() + ": malformed PGM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw Error(ErrorCode::IngestError, path.string() + ": unsupported PGM geometry or depth");
  }
  GrayImage img(w, h);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size())) {
    throw Error(ErrorCode::IngestError, path.string() + ": truncated pixel data");
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IngestError, "cannot write image " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data.data()),
            static_cast<std::streamsize>(image.data.size()));
}

}  // namespace lampdet
