#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <istream>
#include <string>

#include "json.hpp"
#include "mtraffic/error.hpp"
#include "mtraffic/ingest.hpp"
#include "text_util.hpp"

namespace mtraffic {

namespace {

int parse_clock(std::string_view text) {
  text = detail::trim(text);
  const auto parts = detail::split(text, ':');
  if (parts.size() != 2) throw Error(ErrorCode::InvalidInput, "bad time '" + std::string(text) + "'");
  int h = 0;
  int m = 0;
  try {
    h = detail::parse_number<int>(parts[0], 0);
    m = detail::parse_number<int>(parts[1], 0);
  } catch (const Error&) {
    throw Error(ErrorCode::InvalidInput, "bad time '" + std::string(text) + "'");
  }
  if (h < 0 || h > 24 || m < 0 || m > 59 || (h == 24 && m != 0)) {
    throw Error(ErrorCode::InvalidInput, "bad time '" + std::string(text) + "'");
  }
  return h * 60 + m;
}

// Splits one CSV record; quoted fields may contain commas and doubled quotes.
bool split_csv(std::string_view line, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return !quoted;
}

bool is_true(std::string_view s) {
  s = detail::trim(s);
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  return lower == "true" || lower == "1" || lower == "yes";
}

}  // namespace

TimeWindow parse_time_window(std::string_view text) {
  const auto dash = text.find('-');
  if (dash == std::string_view::npos) {
    throw Error(ErrorCode::InvalidInput, "time window needs hh:mm-hh:mm");
  }
  return {parse_clock(text.substr(0, dash)), parse_clock(text.substr(dash + 1))};
}

int lisbon_minute_of_day(std::int64_t epoch_seconds) {
  using namespace std::chrono;
  const sys_seconds t{seconds{epoch_seconds}};
  const year y = year_month_day{floor<days>(t)}.year();
  // Summer time from 01:00 UTC on the last Sunday of March to 01:00 UTC on the last Sunday of October.
  const sys_seconds dst_start = sys_days{y / March / Sunday[last]} + hours{1};
  const sys_seconds dst_end = sys_days{y / October / Sunday[last]} + hours{1};
  const sys_seconds local = t + (t >= dst_start && t < dst_end ? hours{1} : hours{0});
  const auto since_midnight = local - floor<days>(local);
  return static_cast<int>(duration_cast<minutes>(since_midnight).count());
}

std::string_view to_string(TtpDropReason r) noexcept {
  switch (r) {
    case TtpDropReason::MissingData: return "MissingData";
    case TtpDropReason::OutsideWindow: return "OutsideWindow";
    case TtpDropReason::OutsideBbox: return "OutsideBbox";
    case TtpDropReason::TooShort: return "TooShort";
    case TtpDropReason::ParseError: return "ParseError";
  }
  return "unknown";
}

TtpSummary parse_ttp(std::istream& in, const TtpOptions& options,
                     const std::function<void(RawTrajectory&&)>& sink) {
  TtpSummary summary;
  std::string line;
  std::vector<std::string> fields;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty TTP file");
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  split_csv(line, fields);
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (detail::trim(fields[i]) == name) return i;
    }
    return std::nullopt;
  };
  const auto trip_col = column("TRIP_ID");
  const auto time_col = column("TIMESTAMP");
  const auto missing_col = column("MISSING_DATA");
  const auto poly_col = column("POLYLINE");
  if (!time_col || !missing_col || !poly_col) {
    throw Error(ErrorCode::ParseError, "header lacks TIMESTAMP, MISSING_DATA or POLYLINE");
  }
  const std::size_t width = fields.size();

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    ++summary.rows;
    auto drop = [&](TtpDropReason reason, std::string msg) {
      summary.dropped.push_back({line_no, reason, std::move(msg)});
    };
    if (!split_csv(line, fields) || fields.size() != width) {
      drop(TtpDropReason::ParseError, "expected " + std::to_string(width) + " fields");
      continue;
    }
    RawTrajectory t;
    if (trip_col) t.trip_id = fields[*trip_col];
    try {
      t.departure = detail::parse_number<std::int64_t>(detail::trim(fields[*time_col]), line_no);
    } catch (const Error& e) {
      drop(TtpDropReason::ParseError, e.what());
      continue;
    }
    t.complete = !is_true(fields[*missing_col]);
    if (!t.complete) {
      drop(TtpDropReason::MissingData, "incomplete trajectory");
      continue;
    }
    try {
      const auto poly = nlohmann::json::parse(fields[*poly_col]);
      if (!poly.is_array()) throw std::runtime_error("POLYLINE is not a list");
      t.points.reserve(poly.size());
      for (const auto& pt : poly) {
        if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number()) {
          throw std::runtime_error("POLYLINE entry is not a [lon, lat] pair");
        }
        t.points.push_back({pt[1].get<double>(), pt[0].get<double>()});
      }
    } catch (const std::exception& e) {
      drop(TtpDropReason::ParseError, e.what());
      continue;
    }
    if (t.points.size() < 2) {
      drop(TtpDropReason::TooShort, std::to_string(t.points.size()) + " points");
      continue;
    }
    if (options.window && !options.window->contains(lisbon_minute_of_day(t.departure))) {
      drop(TtpDropReason::OutsideWindow, "departure outside time window");
      continue;
    }
    if (options.bbox) {
      const BoundingBox& box = *options.bbox;
      if (!std::all_of(t.points.begin(), t.points.end(), [&](const GeoPoint& p) { return box.contains(p); })) {
        drop(TtpDropReason::OutsideBbox, "point outside bounding box");
        continue;
      }
    }
    ++summary.kept;
    sink(std::move(t));
  }
  return summary;
}

TtpFile read_ttp(std::istream& in, const TtpOptions& options) {
  TtpFile out;
  out.summary = parse_ttp(in, options, [&](RawTrajectory&& t) { out.trajectories.push_back(std::move(t)); });
  return out;
}

TtpFile load_ttp_file(const std::string& path, const TtpOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return read_ttp(in, options);
}

}  // namespace mtraffic
