/*
 * Copyright 2026 The Meterguard Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "meterguard/meterdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_map>

#include "meterguard/error.hpp"

namespace meterguard::meterdata {

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date (H. Hinnant).
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m,
                                       unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
  std::int64_t year;
  unsigned month;
  unsigned day;
};

constexpr CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {y + (m <= 2), m, d};
}

constexpr bool is_leap(std::int64_t y) {
  return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

unsigned days_in_month(std::int64_t y, unsigned m) {
  static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30,
                                       31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

template <typename T>
bool parse_fixed_digits(std::string_view s, T& out) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace

EnergyQuantity EnergyQuantity::from_kwh(double kwh) {
  return EnergyQuantity(static_cast<std::int64_t>(std::llround(kwh * 1000.0)));
}

std::optional<EnergyQuantity> EnergyQuantity::parse_kwh(std::string_view text) {
  if (text.empty()) return std::nullopt;
  bool negative = false;
  if (text.front() == '-' || text.front() == '+') {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  const auto dot = text.find('.');
  const std::string_view whole = text.substr(0, dot);
  std::string_view frac =
      dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  if (whole.empty()) return std::nullopt;
  if (dot != std::string_view::npos && (frac.empty() || frac.size() > 3)) {
    return std::nullopt;
  }
  std::int64_t units = 0;
  if (!parse_fixed_digits(whole, units)) return std::nullopt;
  std::int64_t milli_frac = 0;
  if (!frac.empty()) {
    if (!parse_fixed_digits(frac, milli_frac)) return std::nullopt;
    for (std::size_t i = frac.size(); i < 3; ++i) milli_frac *= 10;
  }
  std::int64_t milli = 0;
  if (__builtin_mul_overflow(units, std::int64_t{1000}, &milli) ||
      __builtin_add_overflow(milli, milli_frac, &milli)) {
    return std::nullopt;
  }
  return EnergyQuantity(negative ? -milli : milli);
}

std::string EnergyQuantity::to_kwh_string() const {
  const bool negative = milli_ < 0;
  // Magnitude via unsigned arithmetic so INT64_MIN formats correctly.
  const std::uint64_t mag = negative ? 0 - static_cast<std::uint64_t>(milli_)
                                     : static_cast<std::uint64_t>(milli_);
  std::string frac = std::to_string(mag % 1000);
  frac.insert(0, 3 - frac.size(), '0');
  return (negative ? "-" : "") + std::to_string(mag / 1000) + "." + frac;
}

EnergyQuantity EnergyQuantity::checked_add(EnergyQuantity other) const {
  std::int64_t out = 0;
  if (__builtin_add_overflow(milli_, other.milli_, &out)) {
    throw Error(ErrorCode::kOverflow, "energy sum exceeds 64-bit range");
  }
  return EnergyQuantity(out);
}

std::optional<EpochSeconds> parse_utc_timestamp(std::string_view s) {
  // YYYY-MM-DDTHH:MM:SSZ
  if (s.size() != 20 || s[4] != '-' || s[7] != '-' || s[10] != 'T' ||
      s[13] != ':' || s[16] != ':' || s[19] != 'Z') {
    return std::nullopt;
  }
  std::int64_t year = 0;
  unsigned month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (!parse_fixed_digits(s.substr(0, 4), year) ||
      !parse_fixed_digits(s.substr(5, 2), month) ||
      !parse_fixed_digits(s.substr(8, 2), day) ||
      !parse_fixed_digits(s.substr(11, 2), hour) ||
      !parse_fixed_digits(s.substr(14, 2), minute) ||
      !parse_fixed_digits(s.substr(17, 2), second)) {
    return std::nullopt;
  }
  if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month) ||
      hour > 23 || minute > 59 || second > 59) {
    return std::nullopt;
  }
  return days_from_civil(year, month, day) * kSecondsPerDay + hour * 3600 +
         minute * 60 + second;
}

std::string format_utc_timestamp(EpochSeconds t) {
  const std::int64_t days = day_index(t);
  const std::int64_t secs = t - days * kSecondsPerDay;
  const CivilDate date = civil_from_days(days);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                static_cast<long long>(date.year), date.month, date.day,
                static_cast<long long>(secs / 3600),
                static_cast<long long>(secs / 60 % 60),
                static_cast<long long>(secs % 60));
  return buf;
}

int hour_of_day(EpochSeconds t) {
  const std::int64_t secs = t - day_index(t) * kSecondsPerDay;
  return static_cast<int>(secs / 3600);
}

std::int64_t day_index(EpochSeconds t) {
  return t >= 0 ? t / kSecondsPerDay : -((-t + kSecondsPerDay - 1) / kSecondsPerDay);
}

FeederDataset::FeederDataset(std::vector<ReadingSeries> series,
                             std::int64_t interval_s,
                             EnergyQuantity delta_max)
    : series_(std::move(series)),
      interval_s_(interval_s),
      delta_max_(delta_max) {
  if (interval_s_ <= 0 || kSecondsPerDay % interval_s_ != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "interval_s must be a positive divisor of one day");
  }
  if (delta_max_.milli_kwh() <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "delta_max must be positive");
  }
  std::sort(series_.begin(), series_.end(),
            [](const ReadingSeries& a, const ReadingSeries& b) {
              return a.meter_id < b.meter_id;
            });
  for (std::size_t i = 0; i < series_.size(); ++i) {
    ReadingSeries& s = series_[i];
    if (i > 0 && series_[i - 1].meter_id == s.meter_id) {
      throw Error(ErrorCode::kInvalidArgument,
                  "duplicate series for meter " + s.meter_id);
    }
    std::sort(s.readings.begin(), s.readings.end(),
              [](const MeterReading& a, const MeterReading& b) {
                return a.timestamp < b.timestamp;
              });
    for (std::size_t j = 0; j < s.readings.size(); ++j) {
      const MeterReading& r = s.readings[j];
      if (r.meter_id != s.meter_id || r.interval_s != interval_s_) {
        throw Error(ErrorCode::kMixedInterval, s.meter_id);
      }
      if (r.energy.milli_kwh() < 0) {
        throw Error(ErrorCode::kNegativeEnergy, s.meter_id);
      }
      if (r.energy > delta_max_) {
        throw Error(ErrorCode::kExceedsCap,
                    s.meter_id + " reading " + r.energy.to_kwh_string() +
                        " kWh exceeds cap " + delta_max_.to_kwh_string());
      }
      if (r.timestamp % interval_s_ != 0) {
        throw Error(ErrorCode::kMisalignedTimestamp, s.meter_id);
      }
      if (j > 0 && s.readings[j - 1].timestamp == r.timestamp) {
        throw Error(ErrorCode::kDuplicateTimestamp,
                    s.meter_id + " at " + format_utc_timestamp(r.timestamp));
      }
    }
  }
}

std::size_t FeederDataset::reading_count() const {
  std::size_t n = 0;
  for (const auto& s : series_) n += s.readings.size();
  return n;
}

FeederDataset parse_csv(std::string_view text, const IngestConfig& config) {
  if (config.interval_s <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "interval_s must be positive");
  }
  std::unordered_map<std::string, std::size_t> index;
  std::vector<ReadingSeries> series;
  // First line each (meter, timestamp) pair was seen, for error reporting.
  std::map<std::pair<std::size_t, EpochSeconds>, std::size_t> seen;

  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim_cr(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;

    if (!header_seen) {
      if (line != "meter_id,timestamp,kwh") {
        throw Error(ErrorCode::kMalformedRow,
                    "expected header meter_id,timestamp,kwh", line_no);
      }
      header_seen = true;
      continue;
    }

    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string_view::npos ||
        line.find(',', c2 + 1) != std::string_view::npos) {
      throw Error(ErrorCode::kMalformedRow, "expected 3 fields", line_no);
    }
    const std::string_view id = line.substr(0, c1);
    const auto ts = parse_utc_timestamp(line.substr(c1 + 1, c2 - c1 - 1));
    const auto energy = EnergyQuantity::parse_kwh(line.substr(c2 + 1));
    if (id.empty() || !ts || !energy) {
      throw Error(ErrorCode::kMalformedRow, std::string(line), line_no);
    }
    if (energy->milli_kwh() < 0) {
      throw Error(ErrorCode::kNegativeEnergy, std::string(line), line_no);
    }
    if (*energy > config.delta_max) {
      throw Error(ErrorCode::kExceedsCap, std::string(line), line_no);
    }
    if (*ts % config.interval_s != 0) {
      throw Error(ErrorCode::kMisalignedTimestamp, std::string(line), line_no);
    }

    auto [it, inserted] = index.try_emplace(std::string(id), series.size());
    if (inserted) series.push_back(ReadingSeries{std::string(id), {}});
    if (!seen.emplace(std::pair{it->second, *ts}, line_no).second) {
      throw Error(ErrorCode::kDuplicateTimestamp, std::string(line), line_no);
    }
    series[it->second].readings.push_back(
        MeterReading{std::string(id), *ts, config.interval_s, *energy});
  }
  return FeederDataset(std::move(series), config.interval_s, config.delta_max);
}

FeederDataset parse_csv(std::istream& in, const IngestConfig& config) {
  const std::string text{std::istreambuf_iterator<char>(in),
                         std::istreambuf_iterator<char>()};
  return parse_csv(std::string_view(text), config);
}

FeederDataset load_csv(const std::string& path, const IngestConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kStorageFailure, "cannot open " + path);
  return parse_csv(in, config);
}

std::string serialize_csv(const FeederDataset& dataset) {
  std::string out = "meter_id,timestamp,kwh\n";
  for (const auto& s : dataset.series()) {
    for (const auto& r : s.readings) {
      out += r.meter_id;
      out += ',';
      out += format_utc_timestamp(r.timestamp);
      out += ',';
      out += r.energy.to_kwh_string();
      out += '\n';
    }
  }
  return out;
}

std::map<EpochSeconds, EnergyQuantity> interval_totals(
    const FeederDataset& dataset) {
  std::map<EpochSeconds, EnergyQuantity> totals;
  for (const auto& s : dataset.series()) {
    for (const auto& r : s.readings) {
      auto& slot = totals[r.timestamp];
      slot = slot.checked_add(r.energy);
    }
  }
  return totals;
}

}  // namespace meterguard::meterdata
