#include "jsmix/time_grid.hpp"

#include <cmath>
#include <sstream>

namespace jsmix {

double unit_length_days(TimeUnit unit) {
  switch (unit) {
    case TimeUnit::Day: return 1.0;
    case TimeUnit::Week: return 7.0;
    case TimeUnit::Month: return kDaysPerMonth;
    case TimeUnit::Year: return 365.25;
  }
  throw ValidationError("unknown time unit");
}

TimeUnit parse_time_unit(const std::string& name) {
  if (name == "day") return TimeUnit::Day;
  if (name == "week") return TimeUnit::Week;
  if (name == "month") return TimeUnit::Month;
  if (name == "year") return TimeUnit::Year;
  throw ValidationError("unknown time unit '" + name + "' (expected day|week|month|year)");
}

std::string time_unit_name(TimeUnit unit) {
  switch (unit) {
    case TimeUnit::Day: return "day";
    case TimeUnit::Week: return "week";
    case TimeUnit::Month: return "month";
    case TimeUnit::Year: return "year";
  }
  return "?";
}

TimeGrid build_time_grid(const std::vector<double>& day_offsets, TimeUnit unit) {
  if (day_offsets.size() < 2) {
    throw ValidationError("time grid needs at least 2 occasions, got " +
                          std::to_string(day_offsets.size()));
  }
  for (size_t t = 1; t < day_offsets.size(); ++t) {
    if (!(day_offsets[t] > day_offsets[t - 1])) {
      std::ostringstream msg;
      msg << "occasion times must be strictly increasing: offset[" << t + 1 << "]="
          << day_offsets[t] << " does not exceed offset[" << t << "]=" << day_offsets[t - 1];
      throw ValidationError(msg.str());
    }
  }
  TimeGrid grid;
  grid.occasion_days = day_offsets;
  grid.unit = unit;
  grid.lags.assign(day_offsets.size(), 0.0);
  const double len = unit_length_days(unit);
  for (size_t t = 1; t < day_offsets.size(); ++t) {
    grid.lags[t] = (day_offsets[t] - day_offsets[t - 1]) / len;
  }
  return grid;
}

double compound_survival(double phi_base, double lag) {
  if (!(phi_base > 0.0 && phi_base < 1.0)) {
    throw ValidationError("base survival must lie in (0,1), got " + std::to_string(phi_base));
  }
  if (lag < 0.0) throw ValidationError("lag must be non-negative");
  if (lag == 0.0) return 1.0;
  return std::pow(phi_base, lag);
}

}  // namespace jsmix
