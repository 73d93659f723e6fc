#include "quench/config.hpp"

#include "quench/io.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <set>

namespace quench {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

const std::set<std::string> kProfiles = {"constant", "cosine-bump", "tanh-interface", "checkerboard",
                                         "smooth-random"};

// Object reader that remembers which keys were consumed, so leftovers can be
// reported as unknown.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ParseError(where(), "expected an object");
    }

    std::string where() const { return path_.empty() ? "/" : path_; }
    std::string at(const std::string& key) const { return path_ + "/" + key; }

    const json* find(const std::string& key) {
        auto it = j_.find(key);
        if (it == j_.end()) return nullptr;
        used_.insert(key);
        return &*it;
    }
    bool has(const std::string& key) const { return j_.contains(key); }

    void number(const std::string& key, double& dst) {
        if (const json* v = find(key)) {
            if (!v->is_number()) throw ParseError(at(key), "expected a number");
            dst = v->get<double>();
            if (!std::isfinite(dst)) throw ParseError(at(key), "must be finite");
        }
    }
    void integer(const std::string& key, int& dst) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) throw ParseError(at(key), "expected an integer");
            dst = v->get<int>();
        }
    }
    void unsigned_integer(const std::string& key, std::uint64_t& dst) {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned()) throw ParseError(at(key), "expected a nonnegative integer");
            dst = v->get<std::uint64_t>();
        }
    }
    void boolean(const std::string& key, bool& dst) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) throw ParseError(at(key), "expected true or false");
            dst = v->get<bool>();
        }
    }
    void string(const std::string& key, std::string& dst) {
        if (const json* v = find(key)) {
            if (!v->is_string()) throw ParseError(at(key), "expected a string");
            dst = v->get<std::string>();
        }
    }
    std::vector<double> numbers(const std::string& key, const json& v) {
        if (!v.is_array()) throw ParseError(at(key), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t k = 0; k < v.size(); ++k) {
            if (!v[k].is_number()) throw ParseError(at(key) + "/" + std::to_string(k), "expected a number");
            out.push_back(v[k].get<double>());
        }
        return out;
    }
    template <std::size_t N>
    void numbers(const std::string& key, std::array<double, N>& dst) {
        if (const json* v = find(key)) {
            const auto xs = numbers(key, *v);
            if (xs.size() != N) throw ParseError(at(key), "expected " + std::to_string(N) + " numbers");
            std::copy(xs.begin(), xs.end(), dst.begin());
        }
    }
    Reader sub(const std::string& key) {
        static const json empty = json::object();
        const json* v = find(key);
        return Reader(v ? *v : empty, at(key));
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ParseError(at(it.key()), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

template <class T>
void require(bool ok, const std::string& field, const T& what) {
    if (!ok) throw ParseError(field, what);
}

FieldSource read_source(const json& v, const std::string& path, const std::string& base_dir, bool series) {
    FieldSource s;
    s.where = path;
    if (v.is_number()) {
        s.value = v.get<double>();
        return s;
    }
    Reader r(v, path);
    auto resolve = [&](const std::string& p) {
        fs::path q(p);
        return (q.is_absolute() ? q : fs::path(base_dir) / q).lexically_normal().string();
    };
    if (r.has("file")) {
        s.kind = "file";
        r.string("file", s.path);
        s.path = resolve(s.path);
    } else if (r.has("snapshots")) {
        require(series, path, "snapshot series are only allowed for time-dependent fields");
        s.kind = "snapshots";
        r.string("snapshots", s.path);
        s.path = resolve(s.path);
        r.string("field", s.field);
        require(!s.field.empty(), r.at("field"), "required with \"snapshots\"");
    } else {
        r.string("profile", s.kind);
        require(kProfiles.count(s.kind) > 0, r.at("profile"), "unknown profile '" + s.kind + "'");
        require(series || s.kind != "smooth-random", r.at("profile"),
                "smooth-random is only allowed for time-dependent fields");
        r.number("value", s.value);
        r.number("amplitude", s.amplitude);
        r.number("offset", s.offset);
        r.integer("kx", s.kx);
        r.integer("ky", s.ky);
        r.string("shape", s.shape);
        require(s.shape == "circle" || s.shape == "line", r.at("shape"), "must be \"circle\" or \"line\"");
        if (r.has("center")) {
            std::array<double, 2> c{};
            r.numbers("center", c);
            s.center = c;
        }
        r.number("radius", s.radius);
        r.number("width", s.width);
        require(s.width > 0.0, r.at("width"), "must be positive");
        r.numbers("normal", s.normal);
        require(std::hypot(s.normal[0], s.normal[1]) > 0.0, r.at("normal"), "must be nonzero");
        r.number("position", s.position);
        if (const json* c = r.find("cells")) {
            require(c->is_array() && c->size() == 2 && (*c)[0].is_number_integer() && (*c)[1].is_number_integer(),
                    r.at("cells"), "expected two integers");
            s.cells = {(*c)[0].get<int>(), (*c)[1].get<int>()};
            require(s.cells[0] >= 1 && s.cells[1] >= 1, r.at("cells"), "must be positive");
        }
        r.unsigned_integer("seed", s.seed);
        r.number("scale", s.scale);
    }
    r.finish();
    return s;
}

ojson source_json(const FieldSource& s) {
    ojson j;
    if (s.kind == "file") {
        j["file"] = s.path;
    } else if (s.kind == "snapshots") {
        j["snapshots"] = s.path;
        j["field"] = s.field;
    } else if (s.kind == "constant") {
        j["profile"] = s.kind;
        j["value"] = s.value;
    } else if (s.kind == "cosine-bump") {
        j["profile"] = s.kind;
        j["amplitude"] = s.amplitude;
        j["kx"] = s.kx;
        j["ky"] = s.ky;
        j["offset"] = s.offset;
    } else if (s.kind == "tanh-interface") {
        j["profile"] = s.kind;
        j["shape"] = s.shape;
        j["amplitude"] = s.amplitude;
        if (s.shape == "circle") {
            if (s.center) j["center"] = *s.center;
            j["radius"] = s.radius;
        } else {
            j["normal"] = s.normal;
            j["position"] = s.position;
        }
        j["width"] = s.width;
        j["offset"] = s.offset;
    } else if (s.kind == "checkerboard") {
        j["profile"] = s.kind;
        j["amplitude"] = s.amplitude;
        j["cells"] = s.cells;
        j["offset"] = s.offset;
    } else {
        j["profile"] = s.kind;
        j["seed"] = s.seed;
        j["scale"] = s.scale;
    }
    return j;
}

Field profile_field(const FieldSource& s, const Grid& g) {
    Field out(g);
    const double pi = M_PI;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double x = g.x(i), y = g.y(j);
            double v = 0.0;
            if (s.kind == "constant") {
                v = s.value;
            } else if (s.kind == "cosine-bump") {
                v = s.amplitude * std::cos(s.kx * pi * x / g.lx) * std::cos(s.ky * pi * y / g.ly) + s.offset;
            } else if (s.kind == "tanh-interface") {
                double d;
                if (s.shape == "circle") {
                    const auto c = s.center.value_or(std::array<double, 2>{0.5 * g.lx, 0.5 * g.ly});
                    d = s.radius - std::hypot(x - c[0], y - c[1]);
                } else {
                    const double len = std::hypot(s.normal[0], s.normal[1]);
                    d = (s.normal[0] * x + s.normal[1] * y) / len - s.position;
                }
                v = s.amplitude * std::tanh(d / s.width) + s.offset;
            } else if (s.kind == "checkerboard") {
                const int ci = static_cast<int>((static_cast<long long>(i) * s.cells[0]) / g.nx);
                const int cj = static_cast<int>((static_cast<long long>(j) * s.cells[1]) / g.ny);
                v = ((ci + cj) % 2 == 0 ? s.amplitude : -s.amplitude) + s.offset;
            } else {
                throw ParseError(s.where, "profile '" + s.kind + "' is not a single field");
            }
            out(i, j) = v;
        }
    return out;
}

Field read_matching(const std::string& path, const Grid& g, const std::string& where) {
    Snapshot snap = read_snapshot(path);
    if (!(snap.values.grid() == g))
        throw ParseError(where, path + " does not match the configured grid");
    return std::move(snap.values);
}

} // namespace

Field materialize(const FieldSource& src, const Grid& g) {
    if (src.kind == "file") return read_matching(src.path, g, src.where);
    if (src.kind == "snapshots") throw ParseError(src.where, "snapshot series where one field is expected");
    return profile_field(src, g);
}

TimeSeries materialize_series(const FieldSource& src, const Grid& g, const TimeGrid& tg) {
    if (src.kind == "smooth-random") {
        TimeSeries s = smooth_direction(g, tg, src.seed);
        for (auto& f : s) f *= src.scale;
        return s;
    }
    if (src.kind == "snapshots") {
        TimeSeries s;
        s.reserve(tg.nodes());
        for (int n = 0; n <= tg.nt; ++n) {
            const std::string path = snapshot_stem(src.path, src.field, n) + ".bin";
            Snapshot snap = read_snapshot(path);
            if (!(snap.values.grid() == g))
                throw ParseError(src.where, path + " does not match the configured grid");
            if (std::abs(snap.header.t - tg.t(n)) > 1e-12 * (1.0 + tg.t_final))
                throw ParseError(src.where, path + " has t = " + format_double(snap.header.t) + ", expected " +
                                                format_double(tg.t(n)));
            s.push_back(std::move(snap.values));
        }
        return s;
    }
    return TimeSeries(static_cast<std::size_t>(tg.nodes()), materialize(src, g));
}

Potential RunConfig::potential() const {
    Potential p;
    p.concave = potential::ConcavePart{c1, c2};
    if (mode == "log")
        p.convex = potential::LogQuench{alpha};
    else
        p.convex = potential::ObstaclePenalty{alpha, eps};
    return p;
}

ControlBox RunConfig::box() const { return constant_box(grid, time, u_min, u_max); }

ControlProblem RunConfig::problem() const {
    ControlProblem p;
    p.grid = grid;
    p.time = time;
    p.params = phys;
    p.potential = potential();
    p.data.f = materialize_series(f, grid, time);
    p.data.phi0 = materialize(phi0, grid);
    p.data.w0 = materialize(w0, grid);
    p.data.w1 = materialize(w1, grid);
    p.box = box();
    p.cost.beta = beta;
    p.cost.nu = nu;
    p.cost.phi_q = materialize_series(phi_q, grid, time);
    p.cost.w_q = materialize_series(w_q, grid, time);
    p.cost.wprime_q = materialize_series(wprime_q, grid, time);
    p.cost.phi_omega = materialize(phi_omega, grid);
    p.cost.w_omega = materialize(w_omega, grid);
    p.cost.wprime_omega = materialize(wprime_omega, grid);
    p.solver = solver;
    p.adjoint = adjoint;
    return p;
}

TimeSeries RunConfig::initial_control() const {
    return project_box(materialize_series(u_initial, grid, time), box());
}

RunConfig parse_config(const std::string& text, const std::string& origin, const std::string& base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError("/", std::string("invalid JSON: ") + e.what());
    }

    RunConfig c;
    c.origin = origin;
    Reader r(root, "");

    {
        require(r.has("grid"), "/grid", "required");
        Reader g = r.sub("grid");
        int nx = 0, ny = 0;
        double lx = 1.0, ly = 0.0;
        require(g.has("nx"), g.at("nx"), "required");
        g.integer("nx", nx);
        ny = nx;
        g.integer("ny", ny);
        g.number("lx", lx);
        ly = lx;
        g.number("ly", ly);
        g.finish();
        require(nx >= 2 && ny >= 2, "/grid", "nx and ny must be at least 2");
        require(lx > 0.0 && ly > 0.0, "/grid", "lx and ly must be positive");
        c.grid = Grid(nx, ny, lx, ly);
    }
    {
        require(r.has("time"), "/time", "required");
        Reader t = r.sub("time");
        double T = 0.0;
        int nt = 0;
        require(t.has("T"), t.at("T"), "required");
        require(t.has("nt"), t.at("nt"), "required");
        t.number("T", T);
        t.integer("nt", nt);
        t.finish();
        require(T > 0.0, "/time/T", "must be positive");
        require(nt >= 1, "/time/nt", "must be at least 1");
        c.time = TimeGrid(T, nt);
    }
    {
        Reader p = r.sub("phys");
        p.number("gamma", c.phys.gamma);
        p.number("a", c.phys.a);
        p.number("b", c.phys.b);
        p.number("kappa1", c.phys.kappa1);
        p.number("kappa2", c.phys.kappa2);
        p.number("lambda", c.phys.lambda);
        p.finish();
    }
    {
        Reader p = r.sub("potential");
        p.number("c1", c.c1);
        p.number("c2", c.c2);
        p.string("mode", c.mode);
        require(c.mode == "log" || c.mode == "obstacle", p.at("mode"), "must be \"log\" or \"obstacle\"");
        if (c.mode == "obstacle") c.alpha = 0.0;
        p.number("alpha", c.alpha);
        p.number("eps", c.eps);
        if (const json* s = p.find("eps_schedule")) c.solver.eps_schedule = p.numbers("eps_schedule", *s);
        p.finish();
        require(c.mode == "obstacle" ? c.alpha >= 0.0 : c.alpha > 0.0, p.at("alpha"),
                c.mode == "log" ? "must be positive" : "must be nonnegative");
        require(c.eps > 0.0, p.at("eps"), "must be positive");
        for (double e : c.solver.eps_schedule) require(e > 0.0, p.at("eps_schedule"), "entries must be positive");
    }
    {
        Reader s = r.sub("solver");
        s.integer("max_newton", c.solver.max_newton);
        s.number("newton_tol", c.solver.newton_tol);
        s.number("interior_margin", c.solver.interior_margin);
        s.integer("max_linear", c.solver.max_linear);
        s.finish();
        require(c.solver.max_newton >= 0, s.at("max_newton"), "must be nonnegative");
        require(c.solver.newton_tol > 0.0, s.at("newton_tol"), "must be positive");
        require(c.solver.interior_margin > 0.0 && c.solver.interior_margin < 1.0, s.at("interior_margin"),
                "must lie in (0,1)");
        require(c.solver.max_linear >= 1, s.at("max_linear"), "must be positive");
    }
    {
        Reader a = r.sub("adjoint");
        a.number("rel_tol", c.adjoint.rel_tol);
        a.integer("max_linear", c.adjoint.max_linear);
        a.finish();
        require(c.adjoint.rel_tol > 0.0, a.at("rel_tol"), "must be positive");
        require(c.adjoint.max_linear >= 1, a.at("max_linear"), "must be positive");
    }
    auto source = [&](Reader& rd, const std::string& key, FieldSource& dst, bool series) {
        if (const json* v = rd.find(key)) dst = read_source(*v, rd.at(key), base_dir, series);
        else dst.where = rd.at(key);
    };
    {
        Reader d = r.sub("data");
        source(d, "phi0", c.phi0, false);
        source(d, "w0", c.w0, false);
        source(d, "w1", c.w1, false);
        source(d, "f", c.f, true);
        d.finish();
    }
    {
        Reader u = r.sub("control");
        u.number("u_min", c.u_min);
        u.number("u_max", c.u_max);
        source(u, "initial", c.u_initial, true);
        u.finish();
    }
    {
        Reader k = r.sub("cost");
        k.numbers("beta", c.beta);
        k.number("nu", c.nu);
        source(k, "phi_q", c.phi_q, true);
        source(k, "phi_omega", c.phi_omega, false);
        source(k, "w_q", c.w_q, true);
        source(k, "w_omega", c.w_omega, false);
        source(k, "wprime_q", c.wprime_q, true);
        source(k, "wprime_omega", c.wprime_omega, false);
        k.finish();
        for (double b : c.beta) require(b >= 0.0, k.at("beta"), "weights must be nonnegative");
        require(c.nu >= 0.0, k.at("nu"), "must be nonnegative");
    }
    {
        Reader o = r.sub("optimizer");
        o.integer("max_iters", c.optimizer.max_iters);
        o.number("step0", c.optimizer.step0);
        o.number("armijo_c", c.optimizer.armijo_c);
        o.number("shrink", c.optimizer.shrink);
        o.number("stat_tol", c.optimizer.stat_tol);
        o.integer("max_backtracks", c.optimizer.max_backtracks);
        o.boolean("polish", c.optimizer.polish);
        o.finish();
        try {
            c.optimizer.validate();
        } catch (const Error& e) {
            throw ParseError("/optimizer", e.what());
        }
    }
    {
        Reader s = r.sub("study");
        RunConfig::Study& st = c.study;
        if (const json* a = s.find("alphas")) {
            require(!s.has("alpha0") && !s.has("count"), s.where(), "give either alphas or alpha0/count");
            st.schedule.alphas = s.numbers("alphas", *a);
        } else if (s.has("alpha0") || s.has("count")) {
            double a0 = 0.1;
            int count = 4;
            s.number("alpha0", a0);
            s.integer("count", count);
            require(count >= 1, s.at("count"), "must be positive");
            st.schedule = QuenchSchedule::geometric(a0, count);
        }
        try {
            st.schedule.validate();
        } catch (const Error& e) {
            throw ParseError(s.at("alphas"), e.what());
        }
        if (const json* e = s.find("reference_eps")) {
            if (e->is_null()) {
                st.reference_eps.reset();
            } else {
                require(e->is_number() && e->get<double>() > 0.0, s.at("reference_eps"),
                        "expected a positive number or null");
                st.reference_eps = e->get<double>();
            }
        }
        s.number("inactive_tol", st.inactive_tol);
        s.boolean("continuation", st.continuation);
        s.number("anchor_eps", st.anchor_eps);
        s.number("slope_min", st.slope_min);
        s.number("slope_max", st.slope_max);
        s.number("max_fit_residual", st.max_fit_residual);
        s.finish();
        require(st.inactive_tol >= 0.0, s.at("inactive_tol"), "must be nonnegative");
        require(st.anchor_eps > 0.0, s.at("anchor_eps"), "must be positive");
        require(st.slope_min <= st.slope_max, s.at("slope_min"), "must not exceed slope_max");
    }
    {
        Reader g = r.sub("gradcheck");
        RunConfig::GradCheck& gc = c.gradcheck;
        g.integer("directions", gc.directions);
        g.number("tau", gc.tau);
        g.unsigned_integer("seed", gc.seed);
        g.number("tolerance", gc.tolerance);
        g.boolean("refine", gc.refine);
        g.number("min_ratio", gc.min_ratio);
        g.finish();
        require(gc.directions >= 1, g.at("directions"), "must be positive");
        require(gc.tau > 0.0, g.at("tau"), "must be positive");
        require(gc.tolerance > 0.0, g.at("tolerance"), "must be positive");
    }
    {
        Reader k = r.sub("certificates");
        k.integer("vi_samples", c.certificates.vi_samples);
        k.unsigned_integer("seed", c.certificates.seed);
        k.finish();
        require(c.certificates.vi_samples >= 0, k.at("vi_samples"), "must be nonnegative");
    }
    {
        Reader o = r.sub("output");
        o.string("dir", c.out_dir);
        o.integer("snapshot_stride", c.snapshot_stride);
        o.finish();
        require(c.snapshot_stride >= 0, o.at("snapshot_stride"), "must be nonnegative");
        if (!c.out_dir.empty() && fs::path(c.out_dir).is_relative())
            c.out_dir = (fs::path(base_dir) / c.out_dir).lexically_normal().string();
    }
    r.integer("threads", c.threads);
    require(c.threads >= 0, "/threads", "must be nonnegative");
    r.finish();
    return c;
}

RunConfig read_config(const std::string& path) {
    std::string text;
    try {
        text = read_text(path);
    } catch (const IoError& e) {
        throw ParseError("/", e.what());
    }
    const fs::path base = fs::path(path).parent_path();
    return parse_config(text, path, base.empty() ? "." : base.string());
}

ValidationReport check_config(const RunConfig& cfg) {
    const ControlProblem p = cfg.problem();
    return validate_assumptions(p.params, p.data, p.box);
}

RunConfig load_config(const std::string& path) {
    RunConfig c = read_config(path);
    ValidationReport rep = check_config(c);
    if (!rep.ok()) throw ValidationError(std::move(rep));
    return c;
}

std::string resolved_json(const RunConfig& c) {
    ojson j;
    j["grid"] = {{"nx", c.grid.nx}, {"ny", c.grid.ny}, {"lx", c.grid.lx}, {"ly", c.grid.ly}};
    j["time"] = {{"T", c.time.t_final}, {"nt", c.time.nt}};
    j["phys"] = {{"gamma", c.phys.gamma},   {"a", c.phys.a},           {"b", c.phys.b},
                 {"kappa1", c.phys.kappa1}, {"kappa2", c.phys.kappa2}, {"lambda", c.phys.lambda}};
    j["potential"] = {{"c1", c.c1}, {"c2", c.c2}, {"mode", c.mode}, {"alpha", c.alpha}, {"eps", c.eps},
                      {"eps_schedule", c.solver.eps_schedule}};
    j["solver"] = {{"max_newton", c.solver.max_newton},
                   {"newton_tol", c.solver.newton_tol},
                   {"interior_margin", c.solver.interior_margin},
                   {"max_linear", c.solver.max_linear}};
    j["adjoint"] = {{"rel_tol", c.adjoint.rel_tol}, {"max_linear", c.adjoint.max_linear}};
    j["data"] = {{"phi0", source_json(c.phi0)},
                 {"w0", source_json(c.w0)},
                 {"w1", source_json(c.w1)},
                 {"f", source_json(c.f)}};
    j["control"] = {{"u_min", c.u_min}, {"u_max", c.u_max}, {"initial", source_json(c.u_initial)}};
    j["cost"] = {{"beta", c.beta},
                 {"nu", c.nu},
                 {"phi_q", source_json(c.phi_q)},
                 {"phi_omega", source_json(c.phi_omega)},
                 {"w_q", source_json(c.w_q)},
                 {"w_omega", source_json(c.w_omega)},
                 {"wprime_q", source_json(c.wprime_q)},
                 {"wprime_omega", source_json(c.wprime_omega)}};
    const OptimizerConfig& o = c.optimizer;
    j["optimizer"] = {{"max_iters", o.max_iters},
                      {"step0", o.step0},
                      {"armijo_c", o.armijo_c},
                      {"shrink", o.shrink},
                      {"stat_tol", o.stat_tol},
                      {"max_backtracks", o.max_backtracks},
                      {"polish", o.polish}};
    const RunConfig::Study& s = c.study;
    ojson study;
    study["alphas"] = s.schedule.alphas;
    study["reference_eps"] = s.reference_eps ? ojson(*s.reference_eps) : ojson(nullptr);
    study["inactive_tol"] = s.inactive_tol;
    study["continuation"] = s.continuation;
    study["anchor_eps"] = s.anchor_eps;
    study["slope_min"] = s.slope_min;
    study["slope_max"] = s.slope_max;
    study["max_fit_residual"] = s.max_fit_residual;
    j["study"] = study;
    const RunConfig::GradCheck& g = c.gradcheck;
    j["gradcheck"] = {{"directions", g.directions}, {"tau", g.tau},       {"seed", g.seed},
                      {"tolerance", g.tolerance},   {"refine", g.refine}, {"min_ratio", g.min_ratio}};
    j["certificates"] = {{"vi_samples", c.certificates.vi_samples}, {"seed", c.certificates.seed}};
    j["output"] = {{"dir", c.out_dir}, {"snapshot_stride", c.snapshot_stride}};
    j["threads"] = c.threads;
    return j.dump(2) + "\n";
}

} // namespace quench
