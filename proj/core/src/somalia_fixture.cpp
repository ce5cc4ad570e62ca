#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "causalaid/rng.hpp"
#include "causalaid/scm.hpp"

namespace causalaid {

namespace {

constexpr int kFirstYear = 2016;
constexpr int kYears = 7;
constexpr int kMonths = 12 * kYears;
constexpr std::size_t kMissingDistrictYears = 21;

bool leap(int year) { return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0; }

int days_in_month(int year, int month) {
  static constexpr int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return month == 2 && leap(year) ? 29 : days[month - 1];
}


std::string number(double value, double step) {
  const int decimals = std::max(0, static_cast<int>(std::ceil(-std::log10(step) - 1e-9)));
  return format_number(*parse_number(fmt::format("{:.{}f}", value, decimals)));
}

std::ofstream open_csv(const std::filesystem::path& path, std::string_view header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ScmError(fmt::format("cannot write '{}'", path.string()));
  out << header << '\n';
  return out;
}

}  // namespace

const std::vector<std::string>& somalia_districts() {
  static const std::vector<std::string> districts = {
      "Adan Yabaal",  "Afgooye",      "Afmadow",      "Baardheere",   "Badhaadhe",   "Baidoa",
      "Balcad",       "Banadir",      "Baraawe",      "Belet Weyne",  "Belet Xaawo", "Berbera",
      "Borama",       "Bosaso",       "Bu'aale",      "Bulo Burto",   "Burco",       "Burhakaba",
      "Burtinle",     "Cabudwaaq",    "Cadaado",      "Cadale",       "Ceel Barde",  "Ceel Waaq",
      "Ceerigaabo",   "Dhuusamarreeb", "Dinsor",      "Doolow",       "Eyl",         "Gaalkacyo",
      "Garbahaarey",  "Garoowe",      "Gebiley",      "Hargeysa",     "Hobyo",       "Iskushuban",
      "Jalalaqsi",    "Jamaame",      "Jilib",        "Jowhar",       "Kismaayo",    "Kurtunwaarey",
      "Laas Caanood", "Luuq",         "Marka",        "Qansax Dheere", "Qardho",     "Qoryooley",
      "Rab Dhuure",   "Saakow",       "Sablaale",     "Tayeeglow",    "Waajid",      "Wanla Weyn",
      "Xarardheere",  "Xudur",        "Zeylac",
  };
  return districts;
}

void write_somalia_fixture(const std::string& directory, std::uint64_t seed) {
  const ScmSpec& spec = benchmark("somalia-shaped");
  const CausalDag& g = spec.dag();
  const auto& districts = somalia_districts();
  std::filesystem::create_directories(directory);
  const std::filesystem::path dir(directory);

  const NodeId enso = g.id("ENSO"), spi = g.id("SPI"), fatalities = g.id("Fatalities"),
               prices = g.id("MarketPrices"), sorghum = g.id("SorghumProduction"),
               displacement = g.id("Displacement"), population = g.id("Population"), cash = g.id("Cash"),
               gam = g.id("GAM");

  // Country-level ENSO per month; index 0 is 2015-12 (the Deyr harvest that
  // covers early 2016), index m + 1 is month m of the study period.
  std::vector<double> enso_month(kMonths + 1);
  {
    Rng rng(derive_seed(seed, "fixture-enso"));
    std::vector<double> values(g.size(), 0.0);
    for (auto& e : enso_month) e = spec.evaluate(enso, values, rng.normal());
  }

  // District-years without any GAM survey; never Baidoa so the district
  // study keeps every year.
  std::set<std::pair<std::size_t, int>> gap_years;
  {
    Rng rng(derive_seed(seed, "fixture-gaps"));
    const auto baidoa = static_cast<std::size_t>(
        std::find(districts.begin(), districts.end(), "Baidoa") - districts.begin());
    while (gap_years.size() < kMissingDistrictYears) {
      const auto d = static_cast<std::size_t>(rng.uniform_index(districts.size()));
      const int year = kFirstYear + static_cast<int>(rng.uniform_index(kYears));
      if (d != baidoa) gap_years.emplace(d, year);
    }
  }

  auto gam_csv = open_csv(dir / "gam.csv", "district,date,gam");
  auto cash_csv = open_csv(dir / "cash.csv", "district,date,recipients");
  auto price_csv = open_csv(dir / "market_prices.csv", "district,date,price");
  auto spi_csv = open_csv(dir / "spi.csv", "district,date,spi");
  auto sorghum_csv = open_csv(dir / "sorghum.csv", "district,date,production");
  auto displacement_csv = open_csv(dir / "displacement.csv", "district,date,displaced");
  auto fatalities_csv = open_csv(dir / "fatalities.csv", "district,date,fatalities");
  auto population_csv = open_csv(dir / "population.csv", "district,population");
  auto quoted = [](const std::string& s) { return s.find(',') == std::string::npos ? s : "\"" + s + "\""; };

  for (std::size_t d = 0; d < districts.size(); ++d) {
    const std::string name = quoted(districts[d]);
    Rng rng(derive_seed(seed, "fixture-district", d));
    std::vector<double> v(g.size(), 0.0);

    const double pop = std::max(20000.0, std::round(spec.evaluate(population, v, rng.normal())));
    population_csv << name << ',' << format_number(pop) << '\n';

    // Sorghum is harvested twice a year (Gu in July, Deyr in December) and
    // held until the next harvest.
    auto harvest = [&](int slot, int year, int month) {
      v[enso] = enso_month[static_cast<std::size_t>(slot)];
      v[spi] = spec.evaluate(spi, v, rng.normal());
      const double per_capita = std::max(0.0, spec.evaluate(sorghum, v, rng.normal()));
      sorghum_csv << name << ',' << fmt::format("{:04d}-{:02d}", year, month) << ','
                  << number(per_capita * pop, 0.1) << '\n';
      return per_capita;
    };
    double held_sorghum = harvest(0, kFirstYear - 1, 12);

    for (int m = 0; m < kMonths; ++m) {
      const int year = kFirstYear + m / 12;
      const int month = m % 12 + 1;
      const std::string date = fmt::format("{:04d}-{:02d}", year, month);

      v[enso] = enso_month[static_cast<std::size_t>(m + 1)];
      v[spi] = spec.evaluate(spi, v, rng.normal());
      v[fatalities] = std::max(0.0, spec.evaluate(fatalities, v, rng.normal()));
      v[prices] = std::max(1.0, spec.evaluate(prices, v, rng.normal()));
      if (month == 7 || month == 12) {
        held_sorghum = std::max(0.0, spec.evaluate(sorghum, v, rng.normal()));
        sorghum_csv << name << ',' << date << ',' << number(held_sorghum * pop, 0.1) << '\n';
      }
      v[sorghum] = held_sorghum;
      v[displacement] = std::max(0.0, spec.evaluate(displacement, v, rng.normal()));
      v[population] = pop;
      v[cash] = std::clamp(spec.evaluate(cash, v, rng.normal()), 0.0, 1.0);
      v[gam] = std::clamp(spec.evaluate(gam, v, rng.normal()), 0.0, 1.0);

      spi_csv << name << ',' << date << ',' << number(v[spi], 0.001) << '\n';

      const bool gap = gap_years.contains({d, year});
      const bool gam_missing = gap || rng.uniform() < 0.03;
      gam_csv << name << ',' << date << ',' << (gam_missing ? std::string("n/a") : number(v[gam], 1e-5)) << '\n';
      cash_csv << name << ',' << date << ','
               << (rng.uniform() < 0.01 ? std::string("n/a") : format_number(std::round(v[cash] * pop))) << '\n';
      price_csv << name << ',' << date << ','
                << (rng.uniform() < 0.02 ? std::string("") : number(v[prices], 0.01)) << '\n';

      // Weekly displacement reports on days 1, 8, 15 and 22; a few weeks
      // are never reported.
      const auto displaced = static_cast<long long>(std::round(v[displacement] * pop));
      for (int w = 0; w < 4; ++w) {
        const long long share = displaced / 4 + (w < displaced % 4 ? 1 : 0);
        if (rng.uniform() < 0.02) continue;
        displacement_csv << name << ',' << fmt::format("{}-{:02d}", date, 1 + 7 * w) << ',' << share << '\n';
      }

      // Fatalities arrive as 1-3 dated events; months without events have
      // no rows.
      auto deaths = static_cast<long long>(std::round(v[fatalities] * pop));
      if (deaths > 0) {
        const auto events = 1 + static_cast<long long>(rng.uniform_index(static_cast<std::uint64_t>(std::min(3LL, deaths))));
        std::vector<int> days;
        for (long long e = 0; e < events; ++e)
          days.push_back(1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(days_in_month(year, month)))));
        std::sort(days.begin(), days.end());
        for (long long e = 0; e < events; ++e) {
          const long long count = e + 1 == events ? deaths : 1 + static_cast<long long>(rng.uniform_index(static_cast<std::uint64_t>(deaths - (events - e - 1))));
          deaths -= count;
          fatalities_csv << name << ',' << fmt::format("{}-{:02d}", date, days[static_cast<std::size_t>(e)]) << ','
                         << count << '\n';
        }
      }
    }
  }

  // Daily country-level ENSO index around the monthly value.
  auto enso_csv = open_csv(dir / "enso.csv", "date,enso");
  Rng rng(derive_seed(seed, "fixture-enso-daily"));
  for (int m = 0; m < kMonths; ++m) {
    const int year = kFirstYear + m / 12;
    const int month = m % 12 + 1;
    for (int day = 1; day <= days_in_month(year, month); ++day) {
      enso_csv << fmt::format("{:04d}-{:02d}-{:02d}", year, month, day) << ','
               << number(enso_month[static_cast<std::size_t>(m + 1)] + 0.1 * rng.normal(), 0.001) << '\n';
    }
  }
}

}  // namespace causalaid
