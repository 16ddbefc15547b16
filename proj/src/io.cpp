#include "invrender/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "invrender/error.hpp"

namespace invrender::io {

namespace {

constexpr const char* kUnexpectedEof = "unexpected end of file";

// Minimal cursor over a byte buffer for the text headers.
class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  // Next whitespace-delimited token; PGM-style '#' comments are skipped.
  std::string token() {
    skip_space();
    std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (start == pos_) fail_format(kUnexpectedEof);
    return std::string(bytes_.substr(start, pos_ - start));
  }

  std::size_t number() {
    const std::string t = token();
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(t, &used);
    } catch (const std::exception&) {
      fail_format("expected an integer, found '" + t + "'");
    }
    if (used != t.size()) fail_format("expected an integer, found '" + t + "'");
    return static_cast<std::size_t>(v);
  }

  // Consumes exactly one whitespace byte (the separator before binary data).
  void single_space() {
    if (pos_ >= bytes_.size()) fail_format(kUnexpectedEof);
    if (!std::isspace(static_cast<unsigned char>(bytes_[pos_]))) fail_format("malformed header");
    ++pos_;
  }

  std::string_view rest() const { return bytes_.substr(pos_); }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& t) {
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end == t.c_str() || *end != '\0') fail_format("expected a number, found '" + t + "'");
  return v;
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) fail_io("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail_io("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail_io("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail_io("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

// --- PGM -------------------------------------------------------------------

std::string encode_pgm(const Image2D& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.reserve(out.size() + image.pixels.size());
  for (double p : image.pixels) {
    const double clamped = std::clamp(p, 0.0, 1.0);
    out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(clamped * 255.0))));
  }
  return out;
}

Image2D decode_pgm(std::string_view bytes) {
  Reader r(bytes);
  if (r.token() != "P5") fail_format("not a binary PGM (P5) file");
  const std::size_t w = r.number();
  const std::size_t h = r.number();
  const std::size_t maxval = r.number();
  if (maxval != 255) fail_format("only maxval 255 PGM files are supported");
  r.single_space();
  const std::string_view data = r.rest();
  if (data.size() < w * h) fail_format(kUnexpectedEof);
  Image2D image(w, h);
  for (std::size_t i = 0; i < w * h; ++i) {
    image.pixels[i] = static_cast<double>(static_cast<std::uint8_t>(data[i])) / 255.0;
  }
  return image;
}

void write_pgm(const fs::path& path, const Image2D& image) { write_file_atomic(path, encode_pgm(image)); }
Image2D read_pgm(const fs::path& path) { return decode_pgm(read_file(path)); }

// --- VOXR ------------------------------------------------------------------

std::string encode_voxr(const VoxelGrid& grid) {
  std::string out = "VOXR " + std::to_string(grid.resolution()) + "\n";
  const std::size_t cells = grid.cell_count();
  std::string bits((cells + 7) / 8, '\0');
  for (std::size_t i = 0; i < cells; ++i) {
    if (grid.occupied(i)) bits[i / 8] = static_cast<char>(bits[i / 8] | (1u << (i % 8)));
  }
  return out + bits;
}

VoxelGrid decode_voxr(std::string_view bytes) {
  if (bytes.substr(0, 5) != "VOXR ") {
    if (bytes.size() < 5 && std::string_view("VOXR ").substr(0, bytes.size()) == bytes) fail_format(kUnexpectedEof);
    fail_format("not a VOXR file");
  }
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string_view::npos) fail_format(kUnexpectedEof);
  Reader r(bytes.substr(5, nl - 5));
  const std::size_t res = r.number();
  if (res == 0 || res > 1024) fail_format("VOXR resolution out of range");
  const std::size_t cells = res * res * res;
  const std::string_view data = bytes.substr(nl + 1);
  if (data.size() < (cells + 7) / 8) fail_format(kUnexpectedEof);
  std::vector<std::uint8_t> occ(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    occ[i] = (static_cast<std::uint8_t>(data[i / 8]) >> (i % 8)) & 1u;
  }
  return VoxelGrid(res, std::move(occ));
}

void write_voxr(const fs::path& path, const VoxelGrid& grid) { write_file_atomic(path, encode_voxr(grid)); }
VoxelGrid read_voxr(const fs::path& path) { return decode_voxr(read_file(path)); }

// --- PLY -------------------------------------------------------------------

std::string encode_ply(const PointCloud& cloud, const std::vector<double>* errors) {
  if (errors && errors->size() != cloud.points.size()) {
    fail_invalid("error scalar count does not match the vertex count");
  }
  std::string out = "ply\nformat ascii 1.0\n";
  if (!cloud.correspondence_id.empty()) out += "comment correspondence_id " + cloud.correspondence_id + "\n";
  out += "element vertex " + std::to_string(cloud.points.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  if (errors) out += "property double error\n";
  out += "end_header\n";
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    out += format_double(p.x) + " " + format_double(p.y) + " " + format_double(p.z);
    if (errors) out += " " + format_double((*errors)[i]);
    out += "\n";
  }
  return out;
}

void write_ply(const fs::path& path, const PointCloud& cloud, const std::vector<double>* errors) {
  write_file_atomic(path, encode_ply(cloud, errors));
}

PlyData decode_ply(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) fail_format(kUnexpectedEof);
  if (line != "ply") fail_format("not a PLY file");

  PlyData data;
  std::size_t vertex_count = 0;
  bool in_vertex = false;
  bool seen_end = false;
  std::vector<std::string> props;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") fail_format("only ASCII PLY is supported");
    } else if (word == "comment") {
      std::string key;
      ls >> key;
      if (key == "correspondence_id") ls >> data.cloud.correspondence_id;
    } else if (word == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      in_vertex = name == "vertex";
      if (in_vertex) vertex_count = count;
    } else if (word == "property") {
      if (in_vertex) {
        std::string type, name;
        ls >> type >> name;
        if (type == "list") fail_format("list properties on vertices are not supported");
        props.push_back(name);
      }
    } else if (word == "end_header") {
      seen_end = true;
      break;
    }
  }
  if (!seen_end) fail_format(kUnexpectedEof);

  auto index_of = [&](const std::string& name) -> long {
    for (std::size_t i = 0; i < props.size(); ++i)
      if (props[i] == name) return static_cast<long>(i);
    return -1;
  };
  const long ix = index_of("x"), iy = index_of("y"), iz = index_of("z"), ie = index_of("error");
  if (ix < 0 || iy < 0 || iz < 0) fail_format("PLY vertices lack x, y or z");

  data.cloud.points.reserve(vertex_count);
  std::vector<std::string> fields(props.size());
  for (std::size_t v = 0; v < vertex_count; ++v) {
    for (auto& f : fields) {
      if (!(in >> f)) fail_format(kUnexpectedEof);
    }
    data.cloud.points.push_back({parse_double(fields[static_cast<std::size_t>(ix)]),
                                 parse_double(fields[static_cast<std::size_t>(iy)]),
                                 parse_double(fields[static_cast<std::size_t>(iz)])});
    if (ie >= 0) data.errors.push_back(parse_double(fields[static_cast<std::size_t>(ie)]));
  }
  return data;
}

PlyData read_ply(const fs::path& path) { return decode_ply(read_file(path)); }

// --- binary container ------------------------------------------------------

std::string encode_blob(const nlohmann::json& header, std::span<const double> values) {
  std::string out = header.dump() + "\n";
  out.reserve(out.size() + values.size() * 8);
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
  }
  return out;
}

Blob decode_blob(std::string_view bytes) {
  if (bytes.empty() || bytes.front() != '{') fail_format("unknown file format");
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string_view::npos) fail_format(kUnexpectedEof);
  Blob blob;
  try {
    blob.header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    fail_format(std::string("malformed header: ") + e.what());
  }
  const std::string_view payload = bytes.substr(nl + 1);
  if (payload.size() % 8 != 0) fail_format(kUnexpectedEof);
  blob.values.resize(payload.size() / 8);
  for (std::size_t i = 0; i < blob.values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(payload[i * 8 + b])) << (8 * b);
    }
    blob.values[i] = std::bit_cast<double>(bits);
  }
  return blob;
}

void write_matrix(const fs::path& path, const Matrix& m) {
  nlohmann::json header = {{"format", "matrix"}, {"format_version", 1}, {"rows", m.rows()}, {"cols", m.cols()}};
  write_file_atomic(path, encode_blob(header, m.data()));
}

Matrix read_matrix(const fs::path& path) {
  Blob blob = decode_blob(read_file(path));
  if (blob.header.value("format", "") != "matrix") fail_format("'" + path.string() + "' is not a matrix file");
  const auto rows = blob.header.at("rows").get<std::size_t>();
  const auto cols = blob.header.at("cols").get<std::size_t>();
  if (blob.values.size() < rows * cols) fail_format(kUnexpectedEof);
  if (blob.values.size() > rows * cols) fail_format("matrix payload longer than its header declares");
  return Matrix(rows, cols, std::move(blob.values));
}

}  // namespace invrender::io
