#include "fuselens/analysis.hpp"

#include <cmath>
#include <ostream>
#include <random>

#include <fmt/format.h>
#include <json.hpp>

#include "fuselens/error.hpp"

namespace fuselens {

namespace {

using ordered_json = nlohmann::ordered_json;

void check_unit(double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw InvariantError(fmt::format("{} = {} is outside [0, 1]", name, v));
    }
}

ordered_json point_json(const OperatingPoint& op) {
    return ordered_json{{"p0", op.p0}, {"p1", op.p1}, {"q0", op.q0},
                        {"q1", op.q1}, {"rb", op.rb}, {"rn", op.rn}};
}

ordered_json report_json(const HMeanReport& r) {
    return ordered_json{{"Pb", r.base_accuracy}, {"Pn", r.novel_accuracy}, {"H", r.harmonic_mean}};
}

void hmean_row(std::ostream& out, double rb, double rn, const HMeanReport& r) {
    out << fmt::format("{:.4f},{:.4f},{:.4f},{:.4f},{:.4f}", rb, rn, r.base_accuracy,
                       r.novel_accuracy, r.harmonic_mean);
}

}  // namespace

void OperatingPoint::validate() const {
    check_unit(p0, "p0");
    check_unit(p1, "p1");
    check_unit(q0, "q0");
    check_unit(q1, "q1");
    check_unit(rb, "rb");
    check_unit(rn, "rn");
}

double harmonic_mean(double a, double b) {
    if (a < 0.0 || b < 0.0 || std::isnan(a) || std::isnan(b)) {
        throw InvariantError("harmonic_mean: inputs must be non-negative");
    }
    if (a + b == 0.0) return 0.0;
    return 2.0 * a * b / (a + b);
}

HMeanReport proposition_hmean(const OperatingPoint& op) {
    op.validate();
    HMeanReport r;
    r.base_accuracy = op.p1 * op.rb + op.p0 * (1.0 - op.rb);
    r.novel_accuracy = op.q1 * op.rn + op.q0 * (1.0 - op.rn);
    r.harmonic_mean = harmonic_mean(r.base_accuracy, r.novel_accuracy);
    return r;
}

ContourGrid contour_grid(double p0, double p1, double q0, double q1, std::size_t resolution) {
    if (resolution < 2) throw InvariantError("contour_grid: resolution must be at least 2");
    ContourGrid grid{p0, p1, q0, q1, resolution, {}};
    grid.cells.reserve(resolution * resolution);
    const double step = 1.0 / static_cast<double>(resolution - 1);
    for (std::size_t i = 0; i < resolution; ++i) {
        for (std::size_t j = 0; j < resolution; ++j) {
            // exact endpoints
            const double rb = i + 1 == resolution ? 1.0 : static_cast<double>(i) * step;
            const double rn = j + 1 == resolution ? 1.0 : static_cast<double>(j) * step;
            grid.cells.push_back({rb, rn, proposition_hmean({p0, p1, q0, q1, rb, rn})});
        }
    }
    return grid;
}

MonteCarloReport monte_carlo_hmean(const OperatingPoint& op, std::uint64_t n_base,
                                   std::uint64_t n_novel, std::uint64_t seed) {
    op.validate();
    if (n_base < 1 || n_novel < 1) {
        throw InvariantError("monte_carlo_hmean: sample counts must be at least 1");
    }
    std::mt19937_64 rng(seed);
    auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

    MonteCarloReport rep;
    rep.point = op;
    rep.seed = seed;
    rep.n_base = n_base;
    rep.n_novel = n_novel;
    for (std::uint64_t k = 0; k < n_base; ++k) {
        const bool few_shot = uniform() < op.rb;
        const bool correct = uniform() < (few_shot ? op.p1 : op.p0);
        rep.base_routed_few_shot += few_shot;
        rep.base_correct += correct;
    }
    for (std::uint64_t k = 0; k < n_novel; ++k) {
        const bool few_shot = uniform() < op.rn;
        const bool correct = uniform() < (few_shot ? op.q1 : op.q0);
        rep.novel_routed_few_shot += few_shot;
        rep.novel_correct += correct;
    }
    rep.estimate.base_accuracy = static_cast<double>(rep.base_correct) / static_cast<double>(n_base);
    rep.estimate.novel_accuracy =
        static_cast<double>(rep.novel_correct) / static_cast<double>(n_novel);
    rep.estimate.harmonic_mean =
        harmonic_mean(rep.estimate.base_accuracy, rep.estimate.novel_accuracy);
    return rep;
}

void write_hmean_csv(std::ostream& out, const OperatingPoint& op, const HMeanReport& report) {
    out << "rb,rn,Pb,Pn,H\n";
    hmean_row(out, op.rb, op.rn, report);
    out << '\n';
}

void write_hmean_json(std::ostream& out, const OperatingPoint& op, const HMeanReport& report) {
    ordered_json doc{{"kind", "hmean"}, {"parameters", point_json(op)},
                     {"report", report_json(report)}};
    out << doc.dump(2) << '\n';
}

void write_contour_csv(std::ostream& out, const ContourGrid& grid) {
    out << "rb,rn,Pb,Pn,H\n";
    for (const auto& c : grid.cells) {
        hmean_row(out, c.rb, c.rn, c.report);
        out << '\n';
    }
}

void write_contour_json(std::ostream& out, const ContourGrid& grid) {
    ordered_json cells = ordered_json::array();
    for (const auto& c : grid.cells) {
        cells.push_back({c.rb, c.rn, c.report.base_accuracy, c.report.novel_accuracy,
                         c.report.harmonic_mean});
    }
    ordered_json doc{
        {"kind", "contour"},
        {"parameters", {{"p0", grid.p0}, {"p1", grid.p1}, {"q0", grid.q0}, {"q1", grid.q1}}},
        {"metadata",
         {{"resolution", grid.resolution},
          {"order", "row-major"},
          {"rows", "rb"},
          {"columns", "rn"},
          {"cell", {"rb", "rn", "Pb", "Pn", "H"}}}},
        {"cells", std::move(cells)}};
    out << doc.dump(2) << '\n';
}

void write_monte_carlo_csv(std::ostream& out, const MonteCarloReport& r) {
    out << "rb,rn,Pb,Pn,H,base_correct,n_base,novel_correct,n_novel,seed,generator\n";
    hmean_row(out, r.point.rb, r.point.rn, r.estimate);
    out << fmt::format(",{},{},{},{},{},{}\n", r.base_correct, r.n_base, r.novel_correct,
                       r.n_novel, r.seed, kMonteCarloGenerator);
}

void write_monte_carlo_json(std::ostream& out, const MonteCarloReport& r) {
    const HMeanReport closed = proposition_hmean(r.point);
    ordered_json doc{
        {"kind", "monte_carlo"},
        {"parameters", point_json(r.point)},
        {"generator", kMonteCarloGenerator},
        {"seed", r.seed},
        {"counts",
         {{"n_base", r.n_base},
          {"n_novel", r.n_novel},
          {"base_routed_few_shot", r.base_routed_few_shot},
          {"novel_routed_few_shot", r.novel_routed_few_shot},
          {"base_correct", r.base_correct},
          {"novel_correct", r.novel_correct}}},
        {"estimate", report_json(r.estimate)},
        {"closed_form", report_json(closed)}};
    out << doc.dump(2) << '\n';
}

}  // namespace fuselens
