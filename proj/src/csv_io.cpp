#include "embryostage/csv_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace embryostage {

namespace {

constexpr std::string_view kHeader = "frame,id,x_um,y_um,z_um,dx_um,dy_um,dz_um";

[[noreturn]] void parse_fail(const std::string& path, std::size_t line, const std::string& what) {
  std::ostringstream msg;
  msg << path << ":" << line << ": " << what;
  throw std::runtime_error(msg.str());
}

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

double parse_double(std::string_view field, const std::string& path, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    parse_fail(path, line, "bad float field '" + std::string(field) + "'");
  }
  return v;
}

long parse_long(std::string_view field, const std::string& path, std::size_t line) {
  long v = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    parse_fail(path, line, "bad integer field '" + std::string(field) + "'");
  }
  return v;
}

}  // namespace

Embryo4D load_embryo_csv(const std::string& path, double hpf_start, double hpf_end) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);

  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) parse_fail(path, 1, "empty file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) {
    parse_fail(path, line_no, "unexpected header (want '" + std::string(kHeader) + "')");
  }

  Embryo4D embryo;
  long expected_id = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::string_view rest(line);
    std::string_view fields[8];
    for (int f = 0; f < 8; ++f) {
      const std::size_t comma = rest.find(',');
      if (comma == std::string_view::npos) {
        if (f != 7) parse_fail(path, line_no, "expected 8 comma-separated fields");
        fields[f] = rest;
        rest = {};
      } else {
        if (f == 7) parse_fail(path, line_no, "expected 8 comma-separated fields");
        fields[f] = rest.substr(0, comma);
        rest.remove_prefix(comma + 1);
      }
    }

    const long frame_no = parse_long(fields[0], path, line_no);
    const long id = parse_long(fields[1], path, line_no);

    if (embryo.frames.empty() || frame_no != embryo.frames.back().index) {
      const long expected_frame = embryo.frames.empty() ? 0 : embryo.frames.back().index + 1;
      if (frame_no != expected_frame) {
        std::ostringstream msg;
        msg << "non-contiguous frame index " << frame_no << " (expected " << expected_frame
            << ")";
        parse_fail(path, line_no, msg.str());
      }
      Frame frame;
      frame.index = static_cast<int>(frame_no);
      embryo.frames.push_back(std::move(frame));
      expected_id = 0;
    }
    if (id != expected_id) {
      std::ostringstream msg;
      msg << "point id " << id << " out of order (expected " << expected_id << ")";
      parse_fail(path, line_no, msg.str());
    }
    ++expected_id;

    Frame& frame = embryo.frames.back();
    frame.points.push_back(Point3{parse_double(fields[2], path, line_no),
                                  parse_double(fields[3], path, line_no),
                                  parse_double(fields[4], path, line_no)});
    const bool dx_empty = fields[5].empty();
    const bool dy_empty = fields[6].empty();
    const bool dz_empty = fields[7].empty();
    if (dx_empty != dy_empty || dy_empty != dz_empty) {
      parse_fail(path, line_no, "displacement fields must be all present or all empty");
    }
    if (dx_empty) {
      frame.displacements.push_back(Displacement3::absent());
    } else {
      frame.displacements.push_back(Displacement3::of(parse_double(fields[5], path, line_no),
                                                      parse_double(fields[6], path, line_no),
                                                      parse_double(fields[7], path, line_no)));
    }
  }

  if (embryo.frames.empty()) {
    throw std::runtime_error(path + ": no frames (header-only file)");
  }
  embryo.label_map =
      StageLabelMap{hpf_start, hpf_end, static_cast<int>(embryo.frames.size())};

  const ValidationReport report = validate_embryo(embryo);
  if (!report.ok()) {
    std::ostringstream msg;
    msg << path << ": structural validation failed:";
    for (const std::string& f : report.failures) msg << "\n  " << f;
    throw std::runtime_error(msg.str());
  }
  return embryo;
}

void save_embryo_csv(const Embryo4D& embryo, const std::string& path) {
  require_valid(embryo, "embryo to save");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);

  std::string buffer;
  buffer.reserve(1 << 20);
  buffer.append(kHeader);
  buffer.push_back('\n');

  for (const Frame& frame : embryo.frames) {
    for (std::size_t i = 0; i < frame.points.size(); ++i) {
      buffer.append(std::to_string(frame.index));
      buffer.push_back(',');
      buffer.append(std::to_string(i));
      buffer.push_back(',');
      append_double(buffer, frame.points[i].x);
      buffer.push_back(',');
      append_double(buffer, frame.points[i].y);
      buffer.push_back(',');
      append_double(buffer, frame.points[i].z);
      buffer.push_back(',');
      const Displacement3& d = frame.displacements[i];
      if (d.present) {
        append_double(buffer, d.dx);
        buffer.push_back(',');
        append_double(buffer, d.dy);
        buffer.push_back(',');
        append_double(buffer, d.dz);
      } else {
        buffer.append(",,");
      }
      buffer.push_back('\n');
      if (buffer.size() > (1 << 20) - 256) {
        out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
        buffer.clear();
      }
    }
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace embryostage
