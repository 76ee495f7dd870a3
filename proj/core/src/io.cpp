#include "rigrecon/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "rigrecon/error.hpp"

namespace rigrecon {

namespace fs = std::filesystem;

namespace {

constexpr double kExactRotation = 1e-12;  // kept verbatim below this drift
constexpr double kMaxRotationDrift = 1e-3;
constexpr double kFirstPoseTolerance = 1e-6;

// --- bytes ----------------------------------------------------------------

void put_float(std::string& out, double v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xffu));
}

void put_int(std::string& out, std::int32_t v) {
  const auto bits = static_cast<std::uint32_t>(v);
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xffu));
}

std::uint32_t get_u32(const std::string& in, size_t offset) {
  std::uint32_t bits = 0;
  for (int k = 0; k < 4; ++k) {
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + k])) << (8 * k);
  }
  return bits;
}

double get_float(const std::string& in, size_t offset) {
  return static_cast<double>(std::bit_cast<float>(get_u32(in, offset)));
}

std::string read_bytes(const fs::path& path, ErrorCode missing) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(missing, "cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_bytes(const fs::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

std::string channel_bytes(const fs::path& dir, const std::string& name, size_t expected) {
  const fs::path path = dir / name;
  if (!fs::exists(path)) throw Error(ErrorCode::MissingChannel, "missing channel file " + name);
  std::string bytes = read_bytes(path, ErrorCode::MissingChannel);
  if (bytes.size() != expected) {
    throw Error(ErrorCode::CorruptBinary, name + " has " + std::to_string(bytes.size()) + " bytes, expected " +
                                              std::to_string(expected));
  }
  return bytes;
}

// --- text -----------------------------------------------------------------

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::optional<double> parse_double(const std::string& tok) {
  double v = 0.0;
  const char* end = tok.data() + tok.size();
  const auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long long> parse_int(const std::string& tok) {
  long long v = 0;
  const char* end = tok.data() + tok.size();
  const auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

class LineError {
 public:
  LineError(std::string file, int line) : file_(std::move(file)), line_(line) {}
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::MalformedLine, file_ + ":" + std::to_string(line_) + ": " + what);
  }
  double number(const std::string& tok) const {
    const auto v = parse_double(tok);
    if (!v) fail("not a finite number: '" + tok + "'");
    return *v;
  }
  int integer(const std::string& tok) const {
    const auto v = parse_int(tok);
    if (!v || *v < std::numeric_limits<int>::min() || *v > std::numeric_limits<int>::max()) {
      fail("not an integer: '" + tok + "'");
    }
    return static_cast<int>(*v);
  }

 private:
  std::string file_;
  int line_;
};

void append_pose(std::string& out, const RigidTransform& t) {
  const Mat3& r = t.rotation.matrix();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) out += " " + format_number(r(i, j));
    out += " " + format_number(t.translation(i));
  }
}

/// 12 numbers starting at tokens[first].
Eigen::Matrix<double, 3, 4> parse_pose_numbers(const std::vector<std::string>& tokens, size_t first,
                                               const LineError& err) {
  if (tokens.size() < first + 12) err.fail("expected 12 pose numbers");
  Eigen::Matrix<double, 3, 4> m;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) m(i, j) = err.number(tokens[first + 4 * i + j]);
  }
  return m;
}

/// Rigid transform from a 3x4 block; `projected` reports an SVD clean-up.
RigidTransform rigid_from(const Eigen::Matrix<double, 3, 4>& m, const std::string& where, bool* projected) {
  const Mat3 r = m.leftCols<3>();
  const double drift = (r.transpose() * r - Mat3::Identity()).norm();
  if (!(r.determinant() > 0.0) || drift > kMaxRotationDrift) {
    throw Error(ErrorCode::NonRigidRotation,
                where + ": rotation is not rigid (orthonormality drift " + format_number(drift) + ")");
  }
  if (projected) *projected = drift > kExactRotation;
  const Rotation rot = drift > kExactRotation ? Rotation::from_matrix(r) : Rotation::from_orthonormal(r);
  return {rot, m.col(3)};
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void write_text(const fs::path& path, const std::string& text) { write_bytes(path, text); }

std::string view_file(int id, const std::string& channel) {
  return "view" + std::to_string(id) + "_" + channel + ".bin";
}

}  // namespace

std::string format_number(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw Error(ErrorCode::IoFailure, "number formatting failed");
  return {buf.data(), ptr};
}

// ---------------------------------------------------------------------------
// Archive

void write_archive(const fs::path& dir, const Archive& archive) {
  archive.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());

  std::string manifest = "rigrecon-archive 1\nbyte-order little-endian\n";
  if (archive.board) {
    manifest += "board " + std::to_string(archive.board->rows) + " " + std::to_string(archive.board->cols) + " " +
                format_number(archive.board->square) + "\n";
  }
  for (const auto& v : archive.views) {
    manifest += "view " + std::to_string(v.id) + " camera " + std::to_string(v.camera) + " pose " +
                std::to_string(v.pose_index) + " width " + std::to_string(v.width) + " height " +
                std::to_string(v.height) + " estimates " + std::to_string(v.estimates.size());
    if (v.ground_mask) manifest += " mask";
    if (v.corners) manifest += " corners";
    manifest += "\n";
    if (v.intrinsics_prior) {
      const Intrinsics& k = *v.intrinsics_prior;
      manifest += "intrinsics " + std::to_string(v.id) + " " + format_number(k.fx) + " " + format_number(k.fy) +
                  " " + format_number(k.cx) + " " + format_number(k.cy) + "\n";
    }
    for (size_t e = 0; e < v.estimates.size(); ++e) {
      const Pointmap& pm = v.estimates[e];
      std::string pts;
      std::string conf;
      pts.reserve(pm.size() * 12);
      conf.reserve(pm.size() * 4);
      for (size_t i = 0; i < pm.size(); ++i) {
        for (int c = 0; c < 3; ++c) put_float(pts, pm.points[i](c));
        put_float(conf, pm.confidence[i]);
      }
      write_bytes(dir / view_file(v.id, "points" + std::to_string(e)), pts);
      write_bytes(dir / view_file(v.id, "confidence" + std::to_string(e)), conf);
    }
    if (v.ground_mask) {
      std::string mask(v.ground_mask->size(), '\0');
      for (size_t i = 0; i < mask.size(); ++i) mask[i] = static_cast<char>((*v.ground_mask)[i] ? 1 : 0);
      write_bytes(dir / view_file(v.id, "mask"), mask);
    }
    if (v.corners) {
      std::string c;
      for (const auto& px : *v.corners) {
        put_float(c, px.x());
        put_float(c, px.y());
      }
      write_bytes(dir / view_file(v.id, "corners"), c);
    }
  }
  std::string matches;
  for (const auto& m : archive.matches) {
    manifest += "pair " + std::to_string(m.view_n) + " " + std::to_string(m.view_m) + " " +
                std::to_string(m.pairs.size()) + "\n";
    for (const auto& p : m.pairs) {
      put_float(matches, p.pixel_n.x());
      put_float(matches, p.pixel_n.y());
      put_float(matches, p.pixel_m.x());
      put_float(matches, p.pixel_m.y());
      put_float(matches, p.weight);
    }
  }
  write_bytes(dir / "matches.bin", matches);
  std::string scores;
  for (double s : archive.scores.data()) put_float(scores, s);
  write_bytes(dir / "scores.bin", scores);
  write_text(dir / "manifest.txt", manifest);
}

Archive read_archive(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.txt";
  if (!fs::exists(manifest_path)) throw Error(ErrorCode::MissingChannel, "no manifest.txt in " + dir.string());
  const std::vector<std::string> lines = read_lines(manifest_path);

  struct Declared {
    ArchiveView view;
    int estimates{0};
    bool mask{false};
    bool corners{false};
  };
  std::vector<Declared> declared;
  std::vector<std::tuple<int, int, size_t>> pairs;
  std::optional<CheckerboardSpec> board;
  bool header = false;
  bool byte_order = false;

  for (size_t ln = 0; ln < lines.size(); ++ln) {
    const LineError err("manifest.txt", static_cast<int>(ln + 1));
    const auto tok = split(lines[ln]);
    if (tok.empty() || tok[0].starts_with('#')) continue;
    if (!header) {
      if (tok.size() != 2 || tok[0] != "rigrecon-archive") err.fail("expected 'rigrecon-archive 1'");
      if (tok[1] != "1") err.fail("unsupported archive version " + tok[1]);
      header = true;
      continue;
    }
    const std::string& key = tok[0];
    if (key == "byte-order") {
      if (tok.size() != 2) err.fail("expected 'byte-order little-endian'");
      if (tok[1] != "little-endian") throw Error(ErrorCode::CorruptBinary, "unsupported byte order " + tok[1]);
      byte_order = true;
    } else if (key == "board") {
      if (tok.size() != 4) err.fail("expected 'board <rows> <cols> <square>'");
      board = CheckerboardSpec{err.integer(tok[1]), err.integer(tok[2]), err.number(tok[3])};
    } else if (key == "view") {
      if (tok.size() < 12 || tok[2] != "camera" || tok[4] != "pose" || tok[6] != "width" || tok[8] != "height" ||
          tok[10] != "estimates") {
        err.fail("expected 'view <id> camera <j> pose <i> width <w> height <h> estimates <k> [mask] [corners]'");
      }
      Declared d;
      d.view.id = err.integer(tok[1]);
      d.view.camera = err.integer(tok[3]);
      d.view.pose_index = err.integer(tok[5]);
      d.view.width = err.integer(tok[7]);
      d.view.height = err.integer(tok[9]);
      d.estimates = err.integer(tok[11]);
      for (size_t k = 12; k < tok.size(); ++k) {
        if (tok[k] == "mask") {
          d.mask = true;
        } else if (tok[k] == "corners") {
          d.corners = true;
        } else {
          err.fail("unknown view channel '" + tok[k] + "'");
        }
      }
      if (d.view.id != static_cast<int>(declared.size())) err.fail("view ids must be declared as 0, 1, 2, ...");
      if (d.view.width <= 0 || d.view.height <= 0 || d.estimates < 1) {
        throw Error(ErrorCode::DimensionMismatch, "view " + std::to_string(d.view.id) + ": empty image or no estimates");
      }
      declared.push_back(std::move(d));
    } else if (key == "intrinsics") {
      if (tok.size() != 6) err.fail("expected 'intrinsics <view> <fx> <fy> <cx> <cy>'");
      const int id = err.integer(tok[1]);
      if (id < 0 || id >= static_cast<int>(declared.size())) {
        throw Error(ErrorCode::MissingChannel, "intrinsics for undeclared view " + tok[1]);
      }
      ArchiveView& v = declared[id].view;
      v.intrinsics_prior =
          Intrinsics{err.number(tok[2]), err.number(tok[3]), err.number(tok[4]), err.number(tok[5]), v.width, v.height};
    } else if (key == "pair") {
      if (tok.size() != 4) err.fail("expected 'pair <view_n> <view_m> <count>'");
      const int n = err.integer(tok[1]);
      const int m = err.integer(tok[2]);
      const int count = err.integer(tok[3]);
      if (count < 0) err.fail("negative match count");
      pairs.emplace_back(n, m, static_cast<size_t>(count));
    } else {
      err.fail("unknown record '" + key + "'");
    }
  }
  if (!header) throw Error(ErrorCode::MalformedLine, "manifest.txt: empty manifest");
  if (!byte_order) throw Error(ErrorCode::MalformedLine, "manifest.txt: missing byte-order record");
  if (declared.empty()) throw Error(ErrorCode::MissingChannel, "manifest declares no views");

  Archive archive;
  archive.board = board;
  const int nviews = static_cast<int>(declared.size());
  for (auto& d : declared) {
    ArchiveView& v = d.view;
    const size_t pixels = static_cast<size_t>(v.width) * v.height;
    for (int e = 0; e < d.estimates; ++e) {
      const std::string pname = view_file(v.id, "points" + std::to_string(e));
      const std::string cname = view_file(v.id, "confidence" + std::to_string(e));
      const std::string pts = channel_bytes(dir, pname, pixels * 12);
      const std::string conf = channel_bytes(dir, cname, pixels * 4);
      Pointmap pm(v.width, v.height);
      for (size_t i = 0; i < pixels; ++i) {
        pm.confidence[i] = get_float(conf, 4 * i);
        if (!std::isfinite(pm.confidence[i]) || pm.confidence[i] < 0.0) {
          throw Error(ErrorCode::CorruptBinary, cname + ": invalid confidence value");
        }
        for (int c = 0; c < 3; ++c) pm.points[i](c) = get_float(pts, 12 * i + 4 * c);
        if (pm.valid(i) && !pm.points[i].allFinite()) {
          throw Error(ErrorCode::CorruptBinary, pname + ": non-finite point at a valid pixel");
        }
      }
      v.estimates.push_back(std::move(pm));
    }
    if (d.mask) {
      const std::string name = view_file(v.id, "mask");
      const std::string bytes = channel_bytes(dir, name, pixels);
      std::vector<std::uint8_t> mask(pixels);
      for (size_t i = 0; i < pixels; ++i) {
        mask[i] = static_cast<std::uint8_t>(bytes[i]);
        if (mask[i] > 1) throw Error(ErrorCode::CorruptBinary, name + ": mask values must be 0 or 1");
      }
      v.ground_mask = std::move(mask);
    }
    if (d.corners) {
      if (!board) throw Error(ErrorCode::DimensionMismatch, "view " + std::to_string(v.id) + " has corners but no board is declared");
      const std::string name = view_file(v.id, "corners");
      const auto count = static_cast<size_t>(board->corner_count());
      const std::string bytes = channel_bytes(dir, name, count * 8);
      std::vector<Vec2> corners(count);
      for (size_t i = 0; i < count; ++i) corners[i] = Vec2(get_float(bytes, 8 * i), get_float(bytes, 8 * i + 4));
      v.corners = std::move(corners);
    }
    archive.views.push_back(std::move(v));
  }

  size_t total = 0;
  for (const auto& [n, m, count] : pairs) {
    if (n < 0 || m < 0 || n >= nviews || m >= nviews) {
      throw Error(ErrorCode::MissingChannel, "matches reference view " + std::to_string(n < 0 || n >= nviews ? n : m) +
                                                 " which the manifest does not declare");
    }
    total += count;
  }
  const std::string matches = channel_bytes(dir, "matches.bin", total * 20);
  size_t offset = 0;
  for (const auto& [n, m, count] : pairs) {
    MatchSet set{n, m, {}};
    set.pairs.reserve(count);
    for (size_t k = 0; k < count; ++k, offset += 20) {
      Match p;
      p.pixel_n = Vec2(get_float(matches, offset), get_float(matches, offset + 4));
      p.pixel_m = Vec2(get_float(matches, offset + 8), get_float(matches, offset + 12));
      p.weight = get_float(matches, offset + 16);
      if (!p.pixel_n.allFinite() || !p.pixel_m.allFinite() || !std::isfinite(p.weight)) {
        throw Error(ErrorCode::CorruptBinary, "matches.bin: non-finite value");
      }
      set.pairs.push_back(p);
    }
    archive.matches.push_back(std::move(set));
  }

  const std::string scores = channel_bytes(dir, "scores.bin", static_cast<size_t>(nviews) * nviews * 4);
  archive.scores = CovisibilityMatrix(nviews);
  for (size_t i = 0; i < archive.scores.data().size(); ++i) {
    archive.scores.data()[i] = get_float(scores, 4 * i);
    if (!std::isfinite(archive.scores.data()[i])) throw Error(ErrorCode::CorruptBinary, "scores.bin: non-finite score");
  }
  archive.validate();
  return archive;
}

// ---------------------------------------------------------------------------
// Trajectory

RobotTrajectory read_trajectory(const fs::path& path, std::vector<std::string>* warnings) {
  if (!fs::exists(path)) throw Error(ErrorCode::IoFailure, "no trajectory file " + path.string());
  const std::vector<std::string> lines = read_lines(path);
  const std::string name = path.filename().string();
  RobotTrajectory traj;
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    const LineError err(name, static_cast<int>(ln + 1));
    const auto tok = split(lines[ln]);
    if (tok.empty() || tok[0].starts_with('#')) continue;
    if (tok.size() != 13) err.fail("expected an index and 12 numbers, found " + std::to_string(tok.size()) + " fields");
    const int index = err.integer(tok[0]);
    if (index != static_cast<int>(traj.poses.size())) {
      err.fail("pose index " + tok[0] + " out of sequence (expected " + std::to_string(traj.poses.size()) + ")");
    }
    bool projected = false;
    traj.poses.push_back(rigid_from(parse_pose_numbers(tok, 1, err), name + ":" + std::to_string(ln + 1), &projected));
    if (projected && warnings) {
      warnings->push_back("pose " + std::to_string(index) + ": rotation re-orthonormalized");
    }
  }
  if (traj.poses.empty()) throw Error(ErrorCode::MalformedLine, name + ": no poses");
  RigidTransform& first = traj.poses.front();
  const double dev = (first.matrix() - Mat4::Identity()).cwiseAbs().maxCoeff();
  if (dev > kFirstPoseTolerance) {
    throw Error(ErrorCode::FirstPoseNotIdentity,
                name + ": first pose deviates from the identity by " + format_number(dev));
  }
  if (dev > 0.0) {
    first = RigidTransform::identity();
    if (warnings) warnings->push_back("first pose snapped to the identity (deviation " + format_number(dev) + ")");
  }
  return traj;
}

void write_trajectory(const fs::path& path, const RobotTrajectory& trajectory) {
  std::string text;
  for (size_t i = 0; i < trajectory.poses.size(); ++i) {
    text += std::to_string(i);
    append_pose(text, trajectory.poses[i]);
    text += "\n";
  }
  write_text(path, text);
}

// ---------------------------------------------------------------------------
// Point cloud

void write_cloud(const fs::path& path, const PointCloudFile& cloud) {
  if (!cloud.source_view.empty() && cloud.source_view.size() != cloud.points.size()) {
    throw Error(ErrorCode::DimensionMismatch, "source_view must be empty or match the point count");
  }
  std::string out = "ply\nformat binary_little_endian 1.0\ncomment rigrecon cloud, frame R_0, meters\n";
  auto frames = [&](const char* kind, const std::vector<RigidTransform>& list) {
    for (size_t k = 0; k < list.size(); ++k) {
      out += std::string("comment frame ") + kind + " " + std::to_string(k);
      append_pose(out, list[k]);
      out += "\n";
    }
  };
  frames("camera", cloud.camera_frames);
  frames("robot", cloud.robot_frames);
  out += "element vertex " + std::to_string(cloud.points.size()) +
         "\nproperty float x\nproperty float y\nproperty float z\nproperty int view\nend_header\n";
  for (size_t i = 0; i < cloud.points.size(); ++i) {
    for (int c = 0; c < 3; ++c) put_float(out, cloud.points[i](c));
    put_int(out, cloud.source_view.empty() ? -1 : cloud.source_view[i]);
  }
  write_bytes(path, out);
}

PointCloudFile read_cloud(const fs::path& path) {
  const std::string bytes = read_bytes(path, ErrorCode::IoFailure);
  const std::string name = path.filename().string();
  PointCloudFile cloud;
  size_t pos = 0;
  int ln = 0;
  size_t vertices = 0;
  std::vector<std::string> properties;
  bool ended = false;
  while (pos < bytes.size()) {
    const size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos) break;
    const std::string line = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    const LineError err(name, ++ln);
    const auto tok = split(line);
    if (ln == 1) {
      if (line != "ply") err.fail("not a PLY file");
      continue;
    }
    if (tok.empty()) continue;
    if (tok[0] == "end_header") {
      ended = true;
      break;
    }
    if (tok[0] == "format") {
      if (tok.size() != 3 || tok[1] != "binary_little_endian") {
        throw Error(ErrorCode::CorruptBinary, name + ": only binary_little_endian PLY is supported");
      }
    } else if (tok[0] == "comment") {
      if (tok.size() >= 2 && tok[1] == "frame") {
        if (tok.size() != 16 || (tok[2] != "camera" && tok[2] != "robot")) err.fail("malformed frame comment");
        const int k = err.integer(tok[3]);
        auto& list = tok[2] == "camera" ? cloud.camera_frames : cloud.robot_frames;
        if (k != static_cast<int>(list.size())) err.fail("frame index out of sequence");
        list.push_back(rigid_from(parse_pose_numbers(tok, 4, err), name, nullptr));
      }
    } else if (tok[0] == "element") {
      if (tok.size() != 3 || tok[1] != "vertex") err.fail("only a vertex element is supported");
      const auto n = parse_int(tok[2]);
      if (!n || *n < 0) err.fail("bad vertex count");
      vertices = static_cast<size_t>(*n);
    } else if (tok[0] == "property") {
      properties.push_back(line);
    } else {
      err.fail("unexpected header line");
    }
  }
  if (!ended) throw Error(ErrorCode::CorruptBinary, name + ": truncated header");
  const std::vector<std::string> expected{"property float x", "property float y", "property float z",
                                          "property int view"};
  if (properties != expected) throw Error(ErrorCode::CorruptBinary, name + ": unexpected vertex layout");
  if (bytes.size() - pos != vertices * 16) {
    throw Error(ErrorCode::CorruptBinary, name + ": vertex data has " + std::to_string(bytes.size() - pos) +
                                              " bytes, expected " + std::to_string(vertices * 16));
  }
  cloud.points.resize(vertices);
  cloud.source_view.resize(vertices);
  for (size_t i = 0; i < vertices; ++i, pos += 16) {
    cloud.points[i] = Vec3(get_float(bytes, pos), get_float(bytes, pos + 4), get_float(bytes, pos + 8));
    cloud.source_view[i] = static_cast<std::int32_t>(get_u32(bytes, pos + 12));
  }
  return cloud;
}

// ---------------------------------------------------------------------------
// Result file

void write_result(const fs::path& path, const CalibrationResult& result) {
  std::string out = "rigrecon-result 1\n";
  for (size_t j = 0; j < result.cameras.size(); ++j) {
    const CameraResult& c = result.cameras[j];
    out += "camera " + std::to_string(j) + "\n";
    out += "extrinsics";
    append_pose(out, c.extrinsics);
    out += "\nlambda " + format_number(c.lambda) + "\n";
    const Intrinsics& k = c.intrinsics;
    out += "intrinsics " + format_number(k.fx) + " " + format_number(k.fy) + " " + format_number(k.cx) + " " +
           format_number(k.cy) + " " + std::to_string(k.width) + " " + std::to_string(k.height) + "\n";
    out += "z_unobservable " + std::to_string(c.z_unobservable ? 1 : 0) + "\n";
    out += "unobservable_axis " + format_number(c.unobservable_axis.x()) + " " +
           format_number(c.unobservable_axis.y()) + " " + format_number(c.unobservable_axis.z()) + "\n";
    out += "min_singular_value " + format_number(c.min_singular_value) + "\n";
    if (c.recovered_z) {
      out += "recovered_z " + format_number(c.recovered_z->mean) + " " + format_number(c.recovered_z->stddev) + "\n";
    }
    out += "handeye_fallback " + std::to_string(c.handeye_fallback ? 1 : 0) + "\n";
    out += "lambda_fallback " + std::to_string(c.lambda_fallback ? 1 : 0) + "\n";
    out += "mean_cal_residual " + format_number(c.mean_cal_residual) + "\n";
    out += "end\n";
  }
  for (const auto& v : result.views) {
    out += "view " + std::to_string(v.id) + " " + std::to_string(v.camera) + " " + std::to_string(v.pose_index) +
           " " + format_number(v.sigma);
    append_pose(out, v.pose);
    out += "\n";
  }
  for (size_t i = 0; i < result.trajectory.poses.size(); ++i) {
    out += "robot " + std::to_string(i);
    append_pose(out, result.trajectory.poses[i]);
    out += "\n";
  }
  const ConvergenceLog& log = result.log;
  out += "initial_loss " + format_number(log.initial_loss) + "\n";
  out += "final_loss " + format_number(log.final_loss) + "\n";
  out += "iterations " + std::to_string(log.iterations) + "\n";
  out += "refine_iterations " + std::to_string(log.refine_iterations) + "\n";
  out += "converged " + std::to_string(log.converged ? 1 : 0) + "\n";
  out += "stop_reason " + log.stop_reason + "\n";
  for (const auto& w : result.warnings) out += "warning " + w + "\n";
  write_text(path, out);
}

CalibrationResult read_result(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::IoFailure, "no result file " + path.string());
  const std::vector<std::string> lines = read_lines(path);
  const std::string name = path.filename().string();
  CalibrationResult r;
  CameraResult* cam = nullptr;
  bool header = false;
  auto rest_of = [](const std::string& line, const std::string& key) {
    return line.size() > key.size() + 1 ? line.substr(key.size() + 1) : std::string();
  };
  for (size_t ln = 0; ln < lines.size(); ++ln) {
    const LineError err(name, static_cast<int>(ln + 1));
    const auto tok = split(lines[ln]);
    if (tok.empty()) continue;
    const std::string& key = tok[0];
    if (!header) {
      if (tok.size() != 2 || key != "rigrecon-result" || tok[1] != "1") err.fail("expected 'rigrecon-result 1'");
      header = true;
      continue;
    }
    auto need = [&](size_t n) {
      if (tok.size() != n) err.fail("'" + key + "' expects " + std::to_string(n - 1) + " values");
    };
    if (key == "camera") {
      need(2);
      if (err.integer(tok[1]) != static_cast<int>(r.cameras.size())) err.fail("camera blocks out of sequence");
      r.cameras.emplace_back();
      cam = &r.cameras.back();
    } else if (key == "end") {
      cam = nullptr;
    } else if (cam) {
      if (key == "extrinsics") {
        need(13);
        cam->extrinsics = rigid_from(parse_pose_numbers(tok, 1, err), name, nullptr);
      } else if (key == "lambda") {
        need(2);
        cam->lambda = err.number(tok[1]);
      } else if (key == "intrinsics") {
        need(7);
        cam->intrinsics = Intrinsics{err.number(tok[1]), err.number(tok[2]), err.number(tok[3]),
                                     err.number(tok[4]), err.integer(tok[5]), err.integer(tok[6])};
      } else if (key == "z_unobservable") {
        need(2);
        cam->z_unobservable = err.integer(tok[1]) != 0;
      } else if (key == "unobservable_axis") {
        need(4);
        cam->unobservable_axis = Vec3(err.number(tok[1]), err.number(tok[2]), err.number(tok[3]));
      } else if (key == "min_singular_value") {
        need(2);
        cam->min_singular_value = err.number(tok[1]);
      } else if (key == "recovered_z") {
        need(3);
        cam->recovered_z = HeightEstimate{err.number(tok[1]), err.number(tok[2])};
      } else if (key == "handeye_fallback") {
        need(2);
        cam->handeye_fallback = err.integer(tok[1]) != 0;
      } else if (key == "lambda_fallback") {
        need(2);
        cam->lambda_fallback = err.integer(tok[1]) != 0;
      } else if (key == "mean_cal_residual") {
        need(2);
        cam->mean_cal_residual = err.number(tok[1]);
      } else {
        err.fail("unknown camera field '" + key + "'");
      }
    } else if (key == "view") {
      need(17);
      ViewResult v;
      v.id = err.integer(tok[1]);
      v.camera = err.integer(tok[2]);
      v.pose_index = err.integer(tok[3]);
      v.sigma = err.number(tok[4]);
      v.pose = rigid_from(parse_pose_numbers(tok, 5, err), name, nullptr);
      r.views.push_back(v);
    } else if (key == "robot") {
      need(14);
      if (err.integer(tok[1]) != static_cast<int>(r.trajectory.poses.size())) err.fail("robot poses out of sequence");
      r.trajectory.poses.push_back(rigid_from(parse_pose_numbers(tok, 2, err), name, nullptr));
    } else if (key == "initial_loss") {
      need(2);
      r.log.initial_loss = err.number(tok[1]);
    } else if (key == "final_loss") {
      need(2);
      r.log.final_loss = err.number(tok[1]);
    } else if (key == "iterations") {
      need(2);
      r.log.iterations = err.integer(tok[1]);
    } else if (key == "refine_iterations") {
      need(2);
      r.log.refine_iterations = err.integer(tok[1]);
    } else if (key == "converged") {
      need(2);
      r.log.converged = err.integer(tok[1]) != 0;
    } else if (key == "stop_reason") {
      r.log.stop_reason = rest_of(lines[ln], key);
    } else if (key == "warning") {
      r.warnings.push_back(rest_of(lines[ln], key));
    } else {
      err.fail("unknown record '" + key + "'");
    }
  }
  if (!header) throw Error(ErrorCode::MalformedLine, name + ": empty result file");
  if (cam) throw Error(ErrorCode::MalformedLine, name + ": unterminated camera block");
  return r;
}

}  // namespace rigrecon
