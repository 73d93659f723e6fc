// ============================================================================
// quench/config.hpp - JSON run configuration
//
// A config names the grids, physical constants, potential, data, control box,
// cost, optimizer and study settings. Everything but "grid" and "time" has a
// default. Field-valued entries are sources:
//
//   {"profile": "constant",       "value": v}
//   {"profile": "cosine-bump",    "amplitude": A, "kx": 1, "ky": 1, "offset": 0}
//        A cos(kx pi x / lx) cos(ky pi y / ly) + offset
//   {"profile": "tanh-interface", "shape": "circle", "amplitude": A, "center": [cx, cy],
//    "radius": R, "width": W, "offset": 0}
//        A tanh((R - |x - c|) / W) + offset;  "shape": "line" uses "normal": [nx, ny]
//        and "position": s instead:  A tanh((n.x - s) / W) + offset
//   {"profile": "checkerboard",   "amplitude": A, "cells": [cx, cy], "offset": 0}
//   {"profile": "smooth-random",  "seed": s, "scale": c}   (time series only)
//   {"file": "path.bin"}                                    (one snapshot)
//   {"snapshots": "dir", "field": "f"}                      (dir/f_000000.bin ... one per node)
//
// A plain number is shorthand for a constant. Relative paths resolve against
// the config file's directory. Unknown keys are rejected.
// ============================================================================
#pragma once

#include "quench/control_opt.hpp"
#include "quench/quench_study.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace quench {

/// Malformed JSON, wrong types, unknown keys or out-of-range settings. The
/// message starts with the JSON pointer of the offending field.
class ParseError : public Error {
public:
    ParseError(const std::string& field, const std::string& what)
        : Error(field + ": " + what), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// The config parses but violates the structural assumptions.
class ValidationError : public Error {
public:
    explicit ValidationError(ValidationReport r) : Error(r.summary()), report_(std::move(r)) {}
    const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

struct FieldSource {
    std::string kind = "constant"; // a profile name, "file" or "snapshots"
    double value = 0.0;
    double amplitude = 0.0;
    double offset = 0.0;
    int kx = 1, ky = 1;
    std::string shape = "circle";
    std::optional<std::array<double, 2>> center; // default: domain centre
    double radius = 0.0;
    double width = 1.0;
    std::array<double, 2> normal{1.0, 0.0};
    double position = 0.0;
    std::array<int, 2> cells{2, 2};
    std::uint64_t seed = 0;
    double scale = 1.0;
    std::string path;  // resolved
    std::string field; // snapshots only
    std::string where; // JSON pointer, for messages

    static FieldSource constant(double v) {
        FieldSource s;
        s.value = v;
        return s;
    }
};

/// Single-field slots accept profiles other than smooth-random, and files.
Field materialize(const FieldSource& src, const Grid& g);
/// One field per time node; profiles and single files are constant in time.
TimeSeries materialize_series(const FieldSource& src, const Grid& g, const TimeGrid& tg);

struct RunConfig {
    std::string origin; // config path, or "<string>"

    Grid grid;
    TimeGrid time;
    PhysParams phys;

    double c1 = 0.0, c2 = 1.0;
    std::string mode = "log"; // or "obstacle"
    double alpha = 0.1;       // log: alpha; obstacle: alpha of the envelope (0 = indicator)
    double eps = 1e-4;        // obstacle only

    SolverOptions solver;
    AdjointOptions adjoint;

    FieldSource phi0, w0, w1, f;

    double u_min = -1.0, u_max = 1.0;
    FieldSource u_initial;

    std::array<double, 6> beta{};
    double nu = 0.0;
    FieldSource phi_q, phi_omega, w_q, w_omega, wprime_q, wprime_omega;

    OptimizerConfig optimizer;

    struct Study {
        QuenchSchedule schedule = QuenchSchedule::geometric(0.1, 4);
        std::optional<double> reference_eps = 1e-4;
        double inactive_tol = 1e-8;
        bool continuation = true;
        double anchor_eps = 1e-4;
        /// Acceptance window for the combined-error slope.
        double slope_min = 0.45, slope_max = 1.6, max_fit_residual = 0.15;
    } study;

    struct GradCheck {
        int directions = 5;
        double tau = 1e-4;
        std::uint64_t seed = 7;
        double tolerance = 1e-2;
        /// Repeat at 2 nt and report the error ratio.
        bool refine = true;
        double min_ratio = 1.5;
    } gradcheck;

    struct Certificates {
        int vi_samples = 20;
        std::uint64_t seed = 5;
    } certificates;

    std::string out_dir = "out";
    int snapshot_stride = 0; // 0 = no snapshots
    int threads = 0;         // 0 = leave the process default

    Potential potential() const;
    ControlBox box() const;
    /// Materializes all sources.
    ControlProblem problem() const;
    TimeSeries initial_control() const;
};

/// Parses and applies defaults; does not check the structural assumptions.
RunConfig parse_config(const std::string& json_text, const std::string& origin = "<string>",
                       const std::string& base_dir = ".");
RunConfig read_config(const std::string& path);

/// validate_assumptions on the materialized problem.
ValidationReport check_config(const RunConfig& cfg);

/// read_config + check_config; throws ValidationError on violations.
RunConfig load_config(const std::string& path);

/// The resolved config as indented JSON; parse_config of the result gives back
/// an equivalent config.
std::string resolved_json(const RunConfig& cfg);

} // namespace quench
