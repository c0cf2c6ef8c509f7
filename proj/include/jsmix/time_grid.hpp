#pragma once

#include <string>
#include <vector>

#include "jsmix/common.hpp"

namespace jsmix {

enum class TimeUnit { Day, Week, Month, Year };

// Month length is a documented convention (mean Gregorian month).
constexpr double kDaysPerMonth = 365.25 / 12.0;

double unit_length_days(TimeUnit unit);
TimeUnit parse_time_unit(const std::string& name);
std::string time_unit_name(TimeUnit unit);

// Occasion timestamps plus the inter-occasion lags, expressed in one time unit.
// lags[0] = 0 by convention: survival acts only between occasions, so the
// recruitment at the first occasion uses rho_1 directly.
struct TimeGrid {
  std::vector<double> occasion_days;  // offsets in days from study start
  TimeUnit unit = TimeUnit::Month;
  std::vector<double> lags;           // lags[t] = (days[t]-days[t-1]) / unit length

  int n_occasions() const { return static_cast<int>(occasion_days.size()); }
};

TimeGrid build_time_grid(const std::vector<double>& day_offsets, TimeUnit unit);

// phi_base^lag: survival across `lag` time units from a per-unit base probability.
double compound_survival(double phi_base, double lag);

}  // namespace jsmix
