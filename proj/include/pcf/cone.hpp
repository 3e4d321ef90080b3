#pragma once
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace pcf {

struct Curve {
    std::string name;
    int self_int = 0;  // D.D
    int k_dot = 0;     // K.D
    double area = 0;   // integral of omega_0 over D
    double c1() const { return -k_dot; }
};

struct ConeProblem {
    std::vector<Curve> curves;
    std::optional<double> gamma_pairing;  // absent for Kahler problems
    bool kahler = false;
    // pairing of c1 with the polarization ray, Kahler problems only
    std::optional<double> c1_polarization;

    // throws ValidationError
    void validate() const;
};

struct ClassPoint {
    double t = 0;
    std::vector<double> pairings;
    std::optional<double> gamma_pairing;
};
ClassPoint class_trajectory(const ConeProblem& p, double t);

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct TauStar {
    double value = kInfinity;
    std::string binding;       // name of the curve that vanishes first
    bool gamma_ok = true;      // condition on the gamma pairing, reported separately
    bool incomplete = false;   // Kahler: nothing binds but c1 is positive on the polarization
    bool finite() const { return value < kInfinity; }
};
TauStar tau_star(const ConeProblem& p);
TauStar kahler_tau_star(const ConeProblem& p);

}  // namespace pcf
