#include "cband/potential.hpp"

#include <charconv>
#include <sstream>

namespace cband {

std::vector<double> PotentialSpec::polynomial_coefficients() const {
  return std::visit(
      [](const auto& s) -> std::vector<double> {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, CosineLattice>) {
          throw UsageError("cosine lattice has no polynomial coefficients");
        } else if constexpr (std::is_same_v<S, Quartic>) {
          return {0.0, 0.0, 0.0, 0.0, 1.0};
        } else if constexpr (std::is_same_v<S, DoubleWell>) {
          return {0.0, 0.0, -5.0, 0.0, 1.0};
        } else {
          return s.coefficients;
        }
      },
      shape);
}

void PotentialSpec::validate() const {
  const auto* poly = std::get_if<Polynomial>(&shape);
  if (poly == nullptr) return;
  const auto& c = poly->coefficients;
  for (double v : c) {
    if (!std::isfinite(v)) throw UsageError("polynomial coefficient is not finite");
  }
  std::size_t degree = c.size();
  while (degree > 0 && c[degree - 1] == 0.0) --degree;
  if (degree < 2) throw UsageError("polynomial potential must have degree >= 1");
}

std::string PotentialSpec::name() const {
  return std::visit(
      [](const auto& s) -> std::string {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, CosineLattice>) {
          return "cosine";
        } else if constexpr (std::is_same_v<S, Quartic>) {
          return "quartic";
        } else if constexpr (std::is_same_v<S, DoubleWell>) {
          return "doublewell";
        } else {
          std::ostringstream os;
          os.precision(17);
          os << "poly:";
          for (std::size_t k = 0; k < s.coefficients.size(); ++k) {
            if (k > 0) os << ',';
            os << s.coefficients[k];
          }
          return os.str();
        }
      },
      shape);
}

PotentialSpec PotentialSpec::parse(const std::string& name, KineticTerm kinetic) {
  if (name == "cosine") return cosine(kinetic);
  if (name == "quartic") return quartic(kinetic);
  if (name == "doublewell") return double_well(kinetic);
  if (name.rfind("poly:", 0) == 0) {
    std::vector<double> c;
    std::stringstream ss(name.substr(5));
    std::string item;
    while (std::getline(ss, item, ',')) {
      double v = 0.0;
      const auto* end = item.data() + item.size();
      auto [ptr, ec] = std::from_chars(item.data(), end, v);
      if (ec != std::errc() || ptr != end) throw UsageError("bad polynomial coefficient '" + item + "'");
      c.push_back(v);
    }
    PotentialSpec spec = polynomial(std::move(c), kinetic);
    spec.validate();
    return spec;
  }
  throw UsageError("unknown potential '" + name + "' (expected cosine, quartic, doublewell, poly:<coeffs>)");
}

Complex initial_momentum(const PotentialSpec& spec, Complex energy, Complex x0, int branch) {
  const Complex kinetic = energy - potential_value<Complex>(spec, x0);
  const Complex p = std::sqrt(kinetic / spec.kinetic_factor());
  return branch < 0 ? -p : p;
}

}  // namespace cband
