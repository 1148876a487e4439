#include "entrodiff/cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "entrodiff/cli/io.hpp"
#include "entrodiff/initial.hpp"

namespace entrodiff::cli {
namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

struct Ctx {
    const std::string& key;
    int line;
    [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(key, line, msg); }
};

double to_double(const std::string& s, const Ctx& c) {
    double v = 0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc() || p != end) c.fail("expected a real number, got '" + s + "'");
    if (!std::isfinite(v)) c.fail("value must be finite");
    return v;
}

long long to_integer(const std::string& s, const Ctx& c) {
    long long v = 0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc() || p != end) c.fail("expected an integer, got '" + s + "'");
    return v;
}

int to_int(const std::string& s, const Ctx& c) {
    const long long v = to_integer(s, c);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) c.fail("integer out of range");
    return int(v);
}

bool to_bool(const std::string& s, const Ctx& c) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    c.fail("expected true or false, got '" + s + "'");
}

template <typename T, typename Conv>
std::vector<T> to_list(const std::string& s, const Ctx& c, Conv conv) {
    std::vector<T> out;
    if (trim(s).empty()) return out;
    for (const auto& item : split(s, ',')) out.push_back(conv(item, c));
    return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        if constexpr (std::is_floating_point_v<T>) s += format_double(v[i]);
        else if constexpr (std::is_same_v<T, std::string>) s += v[i];
        else s += std::to_string(v[i]);
    }
    return s;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const Ctx&)>;
using Getter = std::function<std::optional<std::string>(const ExperimentConfig&)>;

struct KeyDef {
    std::string key;
    Setter set;
    Getter get;
};

std::optional<std::string> opt_str(const std::optional<double>& v) {
    if (!v) return std::nullopt;
    return format_double(*v);
}

#define ED_DOUBLE(KEY, FIELD) \
    KeyDef{KEY, [](ExperimentConfig& c, const std::string& v, const Ctx& x) { c.FIELD = to_double(v, x); }, \
           [](const ExperimentConfig& c) -> std::optional<std::string> { return format_double(c.FIELD); }}
#define ED_OPT_DOUBLE(KEY, FIELD) \
    KeyDef{KEY, [](ExperimentConfig& c, const std::string& v, const Ctx& x) { c.FIELD = to_double(v, x); }, \
           [](const ExperimentConfig& c) { return opt_str(c.FIELD); }}
#define ED_INT(KEY, FIELD) \
    KeyDef{KEY, [](ExperimentConfig& c, const std::string& v, const Ctx& x) { c.FIELD = to_int(v, x); }, \
           [](const ExperimentConfig& c) -> std::optional<std::string> { return std::to_string(c.FIELD); }}
#define ED_STRING(KEY, FIELD) \
    KeyDef{KEY, [](ExperimentConfig& c, const std::string& v, const Ctx&) { c.FIELD = v; }, \
           [](const ExperimentConfig& c) -> std::optional<std::string> { return c.FIELD; }}

const std::vector<KeyDef>& key_table() {
    static const std::vector<KeyDef> table = {
        KeyDef{"system.alpha",
               [](ExperimentConfig& c, const std::string& v, const Ctx& x) { c.alpha = to_list<int>(v, x, to_int); },
               [](const ExperimentConfig& c) -> std::optional<std::string> { return join(c.alpha); }},
        KeyDef{"system.d",
               [](ExperimentConfig& c, const std::string& v, const Ctx& x) { c.d = to_list<double>(v, x, to_double); },
               [](const ExperimentConfig& c) -> std::optional<std::string> { return join(c.d); }},
        ED_INT("grid.dim", dim),
        KeyDef{"grid.lengths",
               [](ExperimentConfig& c, const std::string& v, const Ctx& x) {
                   c.lengths = to_list<double>(v, x, to_double);
               },
               [](const ExperimentConfig& c) -> std::optional<std::string> { return join(c.lengths); }},
        KeyDef{"grid.n", [](ExperimentConfig& c, const std::string& v, const Ctx& x) { c.n = to_list<int>(v, x, to_int); },
               [](const ExperimentConfig& c) -> std::optional<std::string> { return join(c.n); }},
        ED_DOUBLE("stepper.dt", dt),
        ED_DOUBLE("stepper.t_end", t_end),
        ED_INT("stepper.sample_every", sample_every),
        ED_INT("stepper.max_substeps", max_substeps),
        ED_DOUBLE("stepper.positivity_floor", positivity_floor),
        ED_DOUBLE("stepper.reaction_tol", reaction_tol),
        ED_STRING("stepper.scheme", scheme),
        ED_STRING("initial.preset", initial.preset),
        KeyDef{"initial.masses",
               [](ExperimentConfig& c, const std::string& v, const Ctx& x) {
                   c.initial.masses = to_list<double>(v, x, to_double);
               },
               [](const ExperimentConfig& c) -> std::optional<std::string> { return join(c.initial.masses); }},
        KeyDef{"initial.values",
               [](ExperimentConfig& c, const std::string& v, const Ctx& x) {
                   c.initial.values = to_list<double>(v, x, to_double);
               },
               [](const ExperimentConfig& c) -> std::optional<std::string> {
                   if (c.initial.values.empty()) return std::nullopt;
                   return join(c.initial.values);
               }},
        ED_INT("initial.species", initial.species),
        ED_DOUBLE("initial.amplitude", initial.amplitude),
        ED_INT("initial.mode", initial.mode),
        ED_INT("initial.modes", initial.modes),
        KeyDef{"initial.seed",
               [](ExperimentConfig& c, const std::string& v, const Ctx& x) {
                   const long long s = to_integer(v, x);
                   if (s < 0) x.fail("seed must be non-negative");
                   c.initial.seed = std::uint64_t(s);
               },
               [](const ExperimentConfig& c) -> std::optional<std::string> { return std::to_string(c.initial.seed); }},
        KeyDef{"checks.select",
               [](ExperimentConfig& c, const std::string& v, const Ctx&) { c.checks.select = split(v, ','); },
               [](const ExperimentConfig& c) -> std::optional<std::string> { return join(c.checks.select); }},
        ED_DOUBLE("checks.mass_tol", checks.mass_tol),
        ED_DOUBLE("checks.entropy_tol", checks.entropy_tol),
        ED_DOUBLE("checks.energy_rel_tol", checks.energy_rel_tol),
        ED_DOUBLE("checks.energy_d_floor", checks.energy_d_floor),
        ED_DOUBLE("checks.dissipation_slack", checks.dissipation_slack),
        ED_OPT_DOUBLE("checks.gamma", checks.gamma),
        ED_OPT_DOUBLE("checks.t_start", checks.t_start),
        ED_DOUBLE("checks.decay_r2_min", checks.decay_r2_min),
        ED_OPT_DOUBLE("checks.weight_exponent", checks.weight_exponent),
        ED_DOUBLE("checks.l1_threshold", checks.l1_threshold),
        ED_OPT_DOUBLE("checks.t_check", checks.t_check),
        ED_OPT_DOUBLE("checks.mu_theory", checks.mu_theory),
        ED_DOUBLE("checks.mu_slack", checks.mu_slack),
        ED_DOUBLE("checks.ckp_stability", checks.ckp_stability),
        ED_OPT_DOUBLE("checks.c_prc", checks.c_prc),
        ED_OPT_DOUBLE("checks.c_sor", checks.c_sor),
        KeyDef{"output.dir", [](ExperimentConfig& c, const std::string& v, const Ctx&) { c.output.dir = v; },
               [](const ExperimentConfig& c) -> std::optional<std::string> { return c.output.dir; }},
        ED_STRING("output.csv", output.csv),
        ED_STRING("output.summary", output.summary),
        KeyDef{"output.plot",
               [](ExperimentConfig& c, const std::string& v, const Ctx& x) { c.output.plot = to_bool(v, x); },
               [](const ExperimentConfig& c) -> std::optional<std::string> {
                   return std::string(c.output.plot ? "true" : "false");
               }},
    };
    return table;
}

#undef ED_DOUBLE
#undef ED_OPT_DOUBLE
#undef ED_INT
#undef ED_STRING

const KeyDef* find_key(const std::string& key) {
    for (const auto& k : key_table())
        if (k.key == key) return &k;
    return nullptr;
}

struct Assignment {
    std::string key;
    std::string value;
    int line;
};

std::vector<Assignment> lex_flat(const std::string& text) {
    std::vector<Assignment> out;
    std::istringstream is(text);
    std::string raw;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError("", line, "expected 'key = value', got '" + body + "'");
        const std::string key = trim(body.substr(0, eq));
        if (key.empty()) throw ConfigError("", line, "missing key before '='");
        out.push_back({key, trim(body.substr(eq + 1)), line});
    }
    return out;
}

std::string json_scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
    if (v.is_number_float()) return format_double(v.get<double>());
    throw ConfigError("", 0, "unsupported JSON value " + v.dump());
}

std::string json_value(const nlohmann::json& v, char sep) {
    if (!v.is_array()) return json_scalar(v);
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += sep;
        s += v[i].is_array() ? json_value(v[i], ',') : json_scalar(v[i]);
    }
    return s;
}

void flatten_json(const nlohmann::json& j, const std::string& prefix, std::vector<Assignment>& out) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (it->is_object()) {
            flatten_json(*it, key, out);
        } else {
            const bool is_sweep = key.rfind("sweep.", 0) == 0;
            out.push_back({key, json_value(*it, is_sweep ? '|' : ','), 0});
        }
    }
}

std::string describe_degeneracy(const ExperimentConfig& cfg) {
    for (std::size_t i = 0; i < cfg.d.size(); ++i)
        if (cfg.d[i] == 0.0) return i == 0 ? "first" : (i + 1 == cfg.d.size() ? "last" : "middle");
    return "none";
}

} // namespace

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value, int line) {
    Ctx ctx{key, line};
    if (key.rfind("sweep.", 0) == 0) {
        const std::string target = key.substr(6);
        if (!find_key(target)) ctx.fail("sweep over unknown key '" + target + "'");
        auto values = split(value, '|');
        if (values.empty() || std::any_of(values.begin(), values.end(), [](auto& s) { return s.empty(); }))
            ctx.fail("sweep values must be a non-empty '|'-separated list");
        auto it = std::find_if(cfg.sweep.begin(), cfg.sweep.end(), [&](auto& p) { return p.first == target; });
        if (it != cfg.sweep.end()) it->second = values;
        else cfg.sweep.emplace_back(target, values);
        std::sort(cfg.sweep.begin(), cfg.sweep.end());
        return;
    }
    const KeyDef* def = find_key(key);
    if (!def) ctx.fail("unknown key");
    def->set(cfg, value, ctx);
}

ExperimentConfig parse_config(const std::string& text) {
    std::vector<Assignment> assigns;
    const std::string t = trim(text);
    if (!t.empty() && t.front() == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(t);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("", 0, std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object()) throw ConfigError("", 0, "JSON config must be an object");
        flatten_json(j, "", assigns);
    } else {
        assigns = lex_flat(text);
    }

    ExperimentConfig cfg;
    std::map<std::string, int> seen; // key -> line
    std::optional<std::pair<int, int>> declared_m; // value, line
    for (const auto& a : assigns) {
        if (!seen.emplace(a.key, a.line).second) throw ConfigError(a.key, a.line, "duplicate key");
        if (a.key == "system.m") {
            declared_m = {to_int(a.value, Ctx{a.key, a.line}), a.line};
            continue;
        }
        set_config_value(cfg, a.key, a.value, a.line);
    }
    if (!seen.count("system.d")) throw ConfigError("system.d", 0, "missing required key");
    if (!seen.count("system.alpha")) throw ConfigError("system.alpha", 0, "missing required key");
    if (declared_m && declared_m->first != cfg.m())
        throw ConfigError("system.m", declared_m->second,
                          "declares " + std::to_string(declared_m->first) + " species but system.d has " +
                              std::to_string(cfg.m()));
    try {
        validate_config(cfg);
    } catch (const ConfigError& e) {
        // point cross-field failures at the line that set the key
        auto it = seen.find(e.key());
        if (e.line() == 0 && it != seen.end() && it->second > 0) throw ConfigError(e.key(), it->second, e.message());
        throw;
    }
    return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
    auto fail = [](const std::string& key, const std::string& msg) { throw ConfigError(key, 0, msg); };
    try {
        (void)cfg.system();
    } catch (const DomainError& e) {
        const std::string msg = e.what();
        fail(msg.find("alpha") != std::string::npos ? "system.alpha" : "system.d", msg);
    }
    if (cfg.dim != 1 && cfg.dim != 2) fail("grid.dim", "must be 1 or 2");
    if (int(cfg.lengths.size()) != cfg.dim) fail("grid.lengths", "needs one entry per dimension");
    if (int(cfg.n.size()) != cfg.dim) fail("grid.n", "needs one entry per dimension");
    try {
        (void)cfg.grid();
    } catch (const DomainError& e) {
        fail("grid", e.what());
    }
    if (!(cfg.dt > 0)) fail("stepper.dt", "must be positive");
    if (!(cfg.t_end >= 0)) fail("stepper.t_end", "must be non-negative");
    if (cfg.sample_every < 1) fail("stepper.sample_every", "must be >= 1");
    if (cfg.max_substeps < 1) fail("stepper.max_substeps", "must be >= 1");
    if (!(cfg.positivity_floor >= 0)) fail("stepper.positivity_floor", "must be >= 0");
    if (!(cfg.reaction_tol > 0)) fail("stepper.reaction_tol", "must be positive");
    if (cfg.scheme != "strang" && cfg.scheme != "lie" && cfg.scheme != "backward-euler-diffusion")
        fail("stepper.scheme", "must be 'strang', 'lie' or 'backward-euler-diffusion'");

    const auto& ic = cfg.initial;
    if (ic.preset == "equilibrium-cosine") {
        if (int(ic.masses.size()) != cfg.m() - 1) fail("initial.masses", "needs m-1 entries");
        for (double M : ic.masses)
            if (!(M > 0)) fail("initial.masses", "masses must be positive");
        if (ic.species < 1 || ic.species > cfg.m()) fail("initial.species", "must lie in 1..m");
        if (ic.mode < 1) fail("initial.mode", "must be >= 1");
    } else if (ic.preset == "constant") {
        if (int(ic.values.size()) != cfg.m()) fail("initial.values", "needs m entries");
        for (double v : ic.values)
            if (!(v > 0)) fail("initial.values", "values must be strictly positive");
    } else if (ic.preset == "random-smooth") {
        if (!ic.values.empty() && int(ic.values.size()) != cfg.m()) fail("initial.values", "needs m entries");
        for (double v : ic.values)
            if (!(v > 0)) fail("initial.values", "values must be strictly positive");
        if (!(ic.amplitude >= 0 && ic.amplitude <= 0.5)) fail("initial.amplitude", "must lie in [0, 0.5]");
        if (ic.modes < 1) fail("initial.modes", "must be >= 1");
    } else {
        fail("initial.preset", "must be 'constant', 'equilibrium-cosine' or 'random-smooth'");
    }

    static const std::set<std::string> known_checks = {
        "all", "mass", "entropy", "energy", "dissipation", "missing_term", "decay", "growth",
        "l1", "ckp", "ceb", "closeness", "gamma_bound", "algebraic"};
    if (cfg.checks.select.empty()) fail("checks.select", "select at least one check");
    for (const auto& c : cfg.checks.select)
        if (!known_checks.count(c)) fail("checks.select", "unknown check '" + c + "'");
    const bool closeness_selected =
        std::find(cfg.checks.select.begin(), cfg.checks.select.end(), "closeness") != cfg.checks.select.end();
    if (closeness_selected && (!cfg.checks.c_prc || !cfg.checks.c_sor))
        fail("checks.c_prc", "closeness check needs explicit checks.c_prc and checks.c_sor");
    if (cfg.checks.c_prc && !(*cfg.checks.c_prc > 0)) fail("checks.c_prc", "must be positive");
    if (cfg.checks.c_sor && !(*cfg.checks.c_sor > 0)) fail("checks.c_sor", "must be positive");
    if (cfg.output.csv.empty()) fail("output.csv", "must not be empty");
    if (cfg.output.summary.empty()) fail("output.summary", "must not be empty");
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << "system.m = " << cfg.m() << "\n";
    for (const auto& k : key_table()) {
        if (auto v = k.get(cfg)) os << k.key << " = " << *v << "\n";
    }
    for (const auto& [key, values] : cfg.sweep) {
        os << "sweep." << key << " = ";
        for (std::size_t i = 0; i < values.size(); ++i) os << (i ? " | " : "") << values[i];
        os << "\n";
    }
    return os.str();
}

std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& cfg) {
    std::vector<ExperimentConfig> out;
    ExperimentConfig base = cfg;
    base.sweep.clear();
    if (cfg.sweep.empty()) return {base};
    std::vector<std::size_t> idx(cfg.sweep.size(), 0);
    while (true) {
        ExperimentConfig member = base;
        for (std::size_t p = 0; p < cfg.sweep.size(); ++p)
            set_config_value(member, cfg.sweep[p].first, cfg.sweep[p].second[idx[p]]);
        validate_config(member);
        out.push_back(std::move(member));
        std::size_t p = cfg.sweep.size();
        while (p > 0) {
            --p;
            if (++idx[p] < cfg.sweep[p].second.size()) break;
            idx[p] = 0;
            if (p == 0) return out;
        }
    }
}

SystemSpec<double> ExperimentConfig::system() const {
    Vector<double> dv(static_cast<Eigen::Index>(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i) dv[Eigen::Index(i)] = d[i];
    return SystemSpec<double>::make(alpha, dv);
}

Grid<double> ExperimentConfig::grid() const {
    if (dim == 1) return Grid<double>::line(lengths.at(0), n.at(0));
    return Grid<double>::rectangle(lengths.at(0), lengths.at(1), n.at(0), n.at(1));
}

StepperConfig<double> ExperimentConfig::stepper() const {
    StepperConfig<double> s;
    s.dt = dt;
    s.max_substeps = max_substeps;
    s.positivity_floor = positivity_floor;
    s.reaction_tol = reaction_tol;
    s.scheme = scheme == "strang" ? Splitting::Strang : Splitting::Lie;
    return s;
}

StateFields<double> ExperimentConfig::initial_state() const {
    const auto spec = system();
    const auto g = grid();
    const auto& ic = initial;
    auto to_vec = [](const std::vector<double>& v) {
        Vector<double> out(static_cast<Eigen::Index>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) out[Eigen::Index(i)] = v[i];
        return out;
    };
    if (ic.preset == "constant") return constant_state(to_vec(ic.values), g);
    if (ic.preset == "random-smooth") {
        const Vector<double> base = ic.values.empty() ? Vector<double>::Ones(m()) : to_vec(ic.values);
        return random_smooth(g, base, ic.amplitude, ic.modes, ic.seed);
    }
    return equilibrium_cosine(spec, g, to_vec(ic.masses), ic.species - 1, ic.amplitude, ic.mode);
}

double ExperimentConfig::effective_gamma() const {
    if (checks.gamma) return *checks.gamma;
    // exponent with epsilon = 0.1: (1-eps)/2 when the first species is frozen, 1-eps otherwise
    return describe_degeneracy(*this) == "first" ? 0.45 : 0.9;
}

double ExperimentConfig::effective_t_start() const { return checks.t_start ? *checks.t_start : 0.2 * t_end; }

double ExperimentConfig::effective_weight_exponent() const {
    if (checks.weight_exponent) return *checks.weight_exponent;
    return describe_degeneracy(*this) == "first" ? -0.5 : 0.0;
}

double ExperimentConfig::effective_t_check() const { return checks.t_check ? *checks.t_check : t_end; }

double ExperimentConfig::effective_mu_theory() const {
    if (checks.mu_theory) return *checks.mu_theory;
    return describe_degeneracy(*this) == "last" ? 7.0 : 3.0;
}

} // namespace entrodiff::cli
