#pragma once

// Harmonic-mean accuracy of a classifier that routes each sample to either
// the few-shot or the zero-shot branch with a hard (step-function) decision.
//
//   Pb = p1 * rb + p0 * (1 - rb)       base-set accuracy
//   Pn = q1 * rn + q0 * (1 - rn)       novel-set accuracy
//   H  = 2 Pb Pn / (Pb + Pn)
//
// p0/p1: zero-shot/few-shot accuracy on base; q0/q1: the same on novel;
// rb/rn: probability that a base/novel sample is routed to the few-shot branch.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace fuselens {

struct OperatingPoint {
    double p0 = 0.0;
    double p1 = 0.0;
    double q0 = 0.0;
    double q1 = 0.0;
    double rb = 0.0;
    double rn = 0.0;

    // Throws InvariantError if any field lies outside [0, 1].
    void validate() const;
};

struct HMeanReport {
    double base_accuracy = 0.0;   // Pb
    double novel_accuracy = 0.0;  // Pn
    double harmonic_mean = 0.0;   // H
};

// 2ab / (a + b); 0 when a + b == 0. Negative input throws.
double harmonic_mean(double a, double b);

HMeanReport proposition_hmean(const OperatingPoint& op);

struct ContourCell {
    double rb;
    double rn;
    HMeanReport report;
};

// Row-major over rb (rows) then rn (columns):
// cells[i * resolution + j] is at rb = i / (res - 1), rn = j / (res - 1).
struct ContourGrid {
    double p0, p1, q0, q1;
    std::size_t resolution;
    std::vector<ContourCell> cells;

    const ContourCell& at(std::size_t rb_index, std::size_t rn_index) const {
        return cells[rb_index * resolution + rn_index];
    }
};

ContourGrid contour_grid(double p0, double p1, double q0, double q1, std::size_t resolution);

// Name of the pseudo-random generator used by the simulator.
inline constexpr const char* kMonteCarloGenerator = "mt19937_64";

struct MonteCarloReport {
    OperatingPoint point;
    std::uint64_t seed = 0;
    std::uint64_t n_base = 0;
    std::uint64_t n_novel = 0;
    std::uint64_t base_routed_few_shot = 0;
    std::uint64_t novel_routed_few_shot = 0;
    std::uint64_t base_correct = 0;
    std::uint64_t novel_correct = 0;
    HMeanReport estimate;
};

// Simulates the routing classifier: one mt19937_64 stream, base samples first,
// then novel; per sample a routing draw followed by a correctness draw.
// Uniforms are the top 53 bits of each output scaled by 2^-53.
MonteCarloReport monte_carlo_hmean(const OperatingPoint& op, std::uint64_t n_base,
                                   std::uint64_t n_novel, std::uint64_t seed);

// Serialization. CSV column order: rb,rn,Pb,Pn,H (plus counts for Monte Carlo).
void write_hmean_csv(std::ostream& out, const OperatingPoint& op, const HMeanReport& report);
void write_hmean_json(std::ostream& out, const OperatingPoint& op, const HMeanReport& report);
void write_contour_csv(std::ostream& out, const ContourGrid& grid);
void write_contour_json(std::ostream& out, const ContourGrid& grid);
void write_monte_carlo_csv(std::ostream& out, const MonteCarloReport& report);
void write_monte_carlo_json(std::ostream& out, const MonteCarloReport& report);

}  // namespace fuselens
