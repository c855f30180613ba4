#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "chansim.hpp"
#include "channel.hpp"
#include "coding.hpp"
#include "error.hpp"
#include "feedback.hpp"

namespace ocpc::cli {

using Json = nlohmann::ordered_json;

/// One result line: {op, params, value, stderr?, trials?, ...extra}.
struct Record {
    std::string op;
    Json params = Json::object();
    Json value;
    std::optional<double> stderr_;
    std::optional<std::uint64_t> trials;
    Json extra = Json::object();
};

/// Rounds to 12 significant digits so that printed output is stable.
inline double round12(double x)
{
    if (!std::isfinite(x) || x == 0.0) return x;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return std::strtod(buf, nullptr);
}

inline Json rounded(const Json& j)
{
    if (j.is_number_float()) return round12(j.get<double>());
    if (j.is_array() || j.is_object()) {
        Json out = j;
        for (auto& v : out) v = rounded(v);
        return out;
    }
    return j;
}

inline Json to_json(const Record& r)
{
    Json j;
    j["op"] = r.op;
    j["params"] = r.params;
    j["value"] = r.value;
    if (r.stderr_) j["stderr"] = *r.stderr_;
    if (r.trials) j["trials"] = *r.trials;
    for (const auto& [k, v] : r.extra.items()) j[k] = v;
    return rounded(j);
}

// ---------------------------------------------------------------------------
// Operation table

enum class Kind { real, integer, diversity, text, real_list, integer_list };

struct ParamSpec {
    std::string name;
    Kind kind;
    std::optional<std::string> fallback; ///< default, as typed on the command line
    std::string help;
};

struct OpSpec {
    std::string name;
    std::string help;
    std::vector<ParamSpec> params;
    std::vector<std::string> scalar_extras; ///< extra CSV columns
    bool stochastic = false;
};

inline const std::vector<OpSpec>& operations()
{
    static const std::vector<OpSpec> ops = {
        {"capacity", "capacity in nats per unit time",
         {{"L", Kind::diversity, std::nullopt, "diversity (integer >= 2 or inf)"},
          {"alpha", Kind::real, std::nullopt, "leakage"}},
         {}},
        {"dispersion", "channel dispersion in nats^2 per unit time",
         {{"L", Kind::diversity, std::nullopt, "diversity"}, {"alpha", Kind::real, std::nullopt, "leakage"}},
         {}},
        {"spectrum", "information spectrum; value is its mean",
         {{"L", Kind::diversity, std::nullopt, "diversity"},
          {"alpha", Kind::real, std::nullopt, "leakage"},
          {"T", Kind::real, "1", "duration"},
          {"tol", Kind::real, "1e-12", "Poisson tail tolerance"}},
         {"variance", "truncation_mass", "capacity", "dispersion"}},
        {"error-bound", "random-coding upper bound on the optimal error",
         {{"L", Kind::diversity, std::nullopt, "finite diversity"},
          {"alpha", Kind::real, std::nullopt, "leakage"},
          {"T", Kind::real, std::nullopt, "duration"},
          {"M", Kind::integer, std::nullopt, "number of messages"},
          {"tol", Kind::real, "1e-12", "Poisson tail tolerance"}},
         {}},
        {"error-exact", "optimal error for L >= M (closed form at alpha = 0, Monte Carlo otherwise)",
         {{"alpha", Kind::real, "0", "leakage in [0, 1]"},
          {"T", Kind::real, std::nullopt, "duration"},
          {"M", Kind::integer, std::nullopt, "number of messages"},
          {"trials", Kind::integer, "100000", "Monte Carlo trials"},
          {"seed", Kind::integer, std::nullopt, "root seed"},
          {"mc", Kind::integer, "0", "1 = force the Monte Carlo argmin experiment"},
          {"tie", Kind::text, "uniform", "tie rule: uniform | lowest"}},
         {"closed_form"},
         true},
        {"mstar", "largest M with optimal error <= eps (perfect channel)",
         {{"T", Kind::real, std::nullopt, "duration"}, {"eps", Kind::real, std::nullopt, "target error"}},
         {"slack", "log_m"}},
        {"exponent", "error exponent 1 - R; with T also the finite-T slope",
         {{"R", Kind::real, std::nullopt, "rate in (0, 1)"}, {"T", Kind::real, "0", "duration (0 = skip)"}},
         {"slope"}},
        {"identify", "identification false-accept / false-reject probabilities",
         {{"L", Kind::diversity, "inf", "diversity"},
          {"alpha", Kind::real, "0", "leakage (!= 1)"},
          {"T", Kind::real, std::nullopt, "duration"},
          {"c", Kind::real, "0", "decision threshold per unit time"},
          {"trials", Kind::integer, "0", "Monte Carlo trials through the channel (0 = skip)"},
          {"seed", Kind::integer, std::nullopt, "root seed"}},
         {"false_reject", "mc_false_accept", "mc_false_reject"},
         true},
        {"tree", "optimal one-cold tree and one-cold entropy; value is the entropy in nats",
         {{"probs", Kind::real_list, std::nullopt, "comma-separated probabilities"},
          {"symbols", Kind::text, "", "comma-separated symbol names"},
          {"L", Kind::diversity, "inf", "diversity"}},
         {"expected_time", "huffman_bits"}},
        {"feedback-sim", "simulate zero-error feedback transmission with the optimal tree",
         {{"probs", Kind::real_list, std::nullopt, "comma-separated probabilities"},
          {"L", Kind::diversity, "inf", "diversity"},
          {"trials", Kind::integer, "100000", "trials"},
          {"seed", Kind::integer, std::nullopt, "root seed"}},
         {"error_rate", "expected_time"},
         true},
        {"chansim-reject", "rejection-sampling channel simulation (perfect channel); value is overflow rate",
         {{"T", Kind::real, std::nullopt, "duration"},
          {"M", Kind::integer, std::nullopt, "message count"},
          {"bands", Kind::integer_list, "1", "bands of equal-length input segments"},
          {"trials", Kind::integer, "1000", "trials"},
          {"seed", Kind::integer, std::nullopt, "root seed"},
          {"per-trial", Kind::integer, "1", "1 = emit one record per trial"}},
         {"bound"},
         true},
        {"chansim-pfr", "Poisson functional representation channel simulation; value is overflow rate",
         {{"L", Kind::diversity, std::nullopt, "diversity"},
          {"alpha", Kind::real, std::nullopt, "leakage"},
          {"T", Kind::real, std::nullopt, "duration"},
          {"M", Kind::integer, std::nullopt, "message count"},
          {"bands", Kind::integer_list, "1", "bands of equal-length input segments"},
          {"trials", Kind::integer, "1000", "trials"},
          {"seed", Kind::integer, std::nullopt, "root seed"},
          {"per-trial", Kind::integer, "1", "1 = emit one record per trial"}},
         {"bound"},
         true},
        {"chansim-bound", "rejection bound (1 - e^-T)^M; with eps also the sufficient M",
         {{"T", Kind::real, std::nullopt, "duration"},
          {"M", Kind::integer, "1", "message count"},
          {"eps", Kind::real, "0", "target TV distance in (0, 1/e) (0 = skip)"}},
         {"m_sim_upper"}},
        {"gaussian-approx", "normal approximation C T - sqrt(V T) Qinv(eps) of ln M*",
         {{"L", Kind::diversity, std::nullopt, "diversity"},
          {"alpha", Kind::real, std::nullopt, "leakage"},
          {"T", Kind::real, std::nullopt, "duration"},
          {"eps", Kind::real, std::nullopt, "target error"}},
         {}},
        {"sandwich", "lower/upper bounds on the correct probability; value is the lower bound",
         {{"T", Kind::real, std::nullopt, "duration >= 1"}, {"M", Kind::integer, std::nullopt, "messages"}},
         {"upper", "correct"}},
    };
    return ops;
}

inline const OpSpec* find_op(const std::string& name)
{
    for (const auto& op : operations())
        if (op.name == name) return &op;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Parameter parsing

namespace detail {

inline std::vector<std::string> split(const std::string& text, char sep = ',')
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

inline double to_real(const std::string& name, const std::string& text)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    ocpc::detail::require(used == text.size() && used > 0, ErrorCode::invalid_input,
                          "--" + name + " expects a number, got '" + text + "'");
    return v;
}

inline std::uint64_t to_integer(const std::string& name, const std::string& text)
{
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = text.starts_with('-') ? 0 : std::stoull(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    ocpc::detail::require(used == text.size() && used > 0, ErrorCode::invalid_input,
                          "--" + name + " expects a nonnegative integer, got '" + text + "'");
    return v;
}

} // namespace detail

/// Converts a command-line string into the JSON form of a parameter.
inline Json parse_param(const ParamSpec& spec, const std::string& text)
{
    switch (spec.kind) {
    case Kind::real: return detail::to_real(spec.name, text);
    case Kind::integer: return detail::to_integer(spec.name, text);
    case Kind::diversity: {
        try {
            const auto d = Diversity::parse(text);
            return d.is_infinite() ? Json("inf") : Json(d.bands());
        } catch (const Error& e) {
            throw Error(e.code(), std::string("--L: ") + e.what());
        }
    }
    case Kind::text: return text;
    case Kind::real_list: {
        Json list = Json::array();
        for (const auto& item : detail::split(text)) list.push_back(detail::to_real(spec.name, item));
        return list;
    }
    case Kind::integer_list: {
        Json list = Json::array();
        for (const auto& item : detail::split(text)) list.push_back(detail::to_integer(spec.name, item));
        return list;
    }
    }
    return text;
}

/// Normalises a JSON-valued parameter (from a sweep config) to the same form.
inline Json normalize_param(const ParamSpec& spec, const Json& value)
{
    if (value.is_string()) return parse_param(spec, value.get<std::string>());
    if (spec.kind == Kind::diversity && value.is_number()) return parse_param(spec, std::to_string(value.get<long long>()));
    if (spec.kind == Kind::integer && value.is_number()) {
        ocpc::detail::require(value.get<double>() >= 0.0 && std::floor(value.get<double>()) == value.get<double>(),
                              ErrorCode::invalid_input, spec.name + " expects a nonnegative integer");
        return value.get<std::uint64_t>();
    }
    if (spec.kind == Kind::real && value.is_number()) return value.get<double>();
    if ((spec.kind == Kind::real_list || spec.kind == Kind::integer_list) && value.is_array()) return value;
    throw Error(ErrorCode::invalid_input, "parameter " + spec.name + " has the wrong type");
}

/// Default seed: $OCPC_SEED when set, else 1.
inline std::uint64_t default_seed()
{
    if (const char* env = std::getenv("OCPC_SEED")) return detail::to_integer("seed (OCPC_SEED)", env);
    return 1;
}

/// Fills defaults and checks that required parameters are present.
inline Json complete_params(const OpSpec& op, Json params)
{
    Json out = Json::object();
    for (const auto& p : op.params) {
        if (params.contains(p.name)) {
            out[p.name] = normalize_param(p, params[p.name]);
        } else if (p.name == "seed") {
            out[p.name] = default_seed();
        } else if (p.fallback) {
            out[p.name] = parse_param(p, *p.fallback);
        } else {
            throw Error(ErrorCode::invalid_input, op.name + " requires --" + p.name);
        }
    }
    for (const auto& [k, v] : params.items()) {
        const bool known = std::any_of(op.params.begin(), op.params.end(), [&](const auto& p) { return p.name == k; });
        ocpc::detail::require(known, ErrorCode::invalid_input, op.name + " has no parameter '" + k + "'");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace detail {

inline Diversity div(const Json& p, const char* key)
{
    const auto& v = p.at(key);
    return v.is_string() ? Diversity::parse(v.get<std::string>()) : Diversity::finite(v.get<std::uint64_t>());
}

inline double real(const Json& p, const char* key) { return p.at(key).get<double>(); }
inline std::uint64_t integer(const Json& p, const char* key) { return p.at(key).get<std::uint64_t>(); }

inline StepSignal signal_from(const Json& p, double t)
{
    std::vector<Band> bands = p.at("bands").get<std::vector<Band>>();
    ocpc::detail::require(!bands.empty(), ErrorCode::invalid_input, "--bands must list at least one band");
    return StepSignal::uniform_segments(bands, t);
}

inline DiscreteDistribution dist_from(const Json& p)
{
    auto probs = p.at("probs").get<std::vector<double>>();
    std::vector<std::string> symbols;
    if (p.contains("symbols")) symbols = split(p.at("symbols").get<std::string>());
    if (symbols.empty())
        for (std::size_t i = 0; i < probs.size(); ++i) symbols.push_back(std::to_string(i + 1));
    ocpc::detail::require(symbols.size() == probs.size(), ErrorCode::invalid_input,
                          "--symbols and --probs differ in length");
    return {std::move(symbols), std::move(probs)};
}

} // namespace detail

/// Per-trial sink for chansim records; may be empty.
using TrialSink = std::function<void(const Json&)>;

/// Runs one operation on completed parameters.
inline Record evaluate(const OpSpec& op, const Json& p, const TrialSink& sink = {})
{
    using namespace detail;
    Record r;
    r.op = op.name;
    r.params = p;
    const std::string& name = op.name;

    if (name == "capacity") {
        r.value = capacity(div(p, "L"), real(p, "alpha"));
    } else if (name == "dispersion") {
        r.value = dispersion(div(p, "L"), real(p, "alpha"));
    } else if (name == "spectrum") {
        const auto d = div(p, "L");
        const auto s = spectrum(d, real(p, "alpha"), real(p, "T"), PoissonTruncation(real(p, "tol")));
        r.value = s.mean();
        r.extra["variance"] = s.variance();
        r.extra["truncation_mass"] = s.truncation_mass;
        r.extra["capacity"] = capacity(d, real(p, "alpha")) * real(p, "T");
        r.extra["dispersion"] = dispersion(d, real(p, "alpha")) * real(p, "T");
        Json atoms = Json::array();
        for (const auto& [v, pr] : s.atoms) atoms.push_back({v, pr});
        r.extra["atoms"] = atoms;
    } else if (name == "error-bound") {
        r.value = random_coding_error_bound(div(p, "L"), real(p, "alpha"), real(p, "T"), integer(p, "M"),
                                            PoissonTruncation(real(p, "tol")));
    } else if (name == "error-exact") {
        const auto tie = p.at("tie").get<std::string>();
        ocpc::detail::require(tie == "uniform" || tie == "lowest", ErrorCode::invalid_input,
                              "--tie must be 'uniform' or 'lowest', got '" + tie + "'");
        const double alpha = real(p, "alpha");
        const double t = real(p, "T");
        const auto m = integer(p, "M");
        if (integer(p, "mc") != 0) {
            const auto e = optimal_error_monte_carlo(alpha, t, m, integer(p, "trials"), integer(p, "seed"),
                                                     tie == "lowest" ? TieRule::lowest : TieRule::uniform);
            r.value = e.value;
            r.stderr_ = e.stderr_;
            r.trials = e.trials;
        } else {
            const auto e = optimal_error_exact(alpha, t, m, integer(p, "trials"), integer(p, "seed"));
            r.value = e.value;
            if (!e.exact) {
                r.stderr_ = e.stderr_;
                r.trials = e.trials;
            }
        }
        if (alpha == 0.0) r.extra["closed_form"] = optimal_error_perfect(t, static_cast<double>(m));
    } else if (name == "mstar") {
        const double t = real(p, "T");
        const double eps = real(p, "eps");
        const auto m = m_star_perfect(t, eps);
        r.value = m;
        r.extra["log_m"] = std::log(static_cast<double>(m));
        r.extra["slack"] = m_star_slack(t, eps);
        if (eps <= 1.0 / 12.0) {
            const double slack = m_star_slack(t, eps);
            r.extra["slack_in_bounds"] = slack >= 0.0 && slack <= 2.0;
        }
    } else if (name == "exponent") {
        r.value = error_exponent(real(p, "R"));
        if (real(p, "T") > 0.0) r.extra["slope"] = empirical_exponent(real(p, "T"), real(p, "R"));
    } else if (name == "identify") {
        const auto d = div(p, "L");
        const auto e = identification_errors(d, real(p, "alpha"), real(p, "T"), real(p, "c"));
        r.value = e.false_accept;
        r.extra["false_reject"] = e.false_reject;
        if (integer(p, "trials") > 0) {
            const auto [fa, fr] = identification_monte_carlo(ChannelParams(d, real(p, "alpha"), real(p, "T")),
                                                             real(p, "c"), integer(p, "trials"), integer(p, "seed"));
            r.extra["mc_false_accept"] = fa.value;
            r.extra["mc_false_reject"] = fr.value;
            r.trials = fa.trials;
        }
    } else if (name == "tree") {
        const auto dist = dist_from(p);
        const auto res = one_cold_entropy(dist, div(p, "L"));
        r.value = res.one_cold_entropy;
        r.extra["expected_time"] = res.expected_time;
        r.extra["huffman_bits"] = huffman_expected_length(dist);
        r.extra["tree"] = to_json(res.optimal_tree, dist);
    } else if (name == "feedback-sim") {
        const auto dist = dist_from(p);
        const auto d = div(p, "L");
        const auto res = one_cold_entropy(dist, d);
        const auto sim = simulate_feedback(res.optimal_tree, dist, integer(p, "trials"), integer(p, "seed"), d);
        r.value = sim.mean_time;
        r.stderr_ = sim.time_stderr;
        r.trials = sim.trials;
        r.extra["error_rate"] = sim.error_rate;
        r.extra["expected_time"] = res.expected_time;
    } else if (name == "chansim-reject" || name == "chansim-pfr") {
        const bool reject = name == "chansim-reject";
        const double t = real(p, "T");
        const auto m = integer(p, "M");
        const auto trials = integer(p, "trials");
        ocpc::detail::require(trials >= 1, ErrorCode::invalid_input, "--trials must be >= 1");
        const auto signal = signal_from(p, t);
        const ChannelParams params = reject ? ChannelParams::perfect(t)
                                            : ChannelParams(div(p, "L"), real(p, "alpha"), t);
        std::uint64_t overflows = 0;
        for (std::uint64_t trial = 0; trial < trials; ++trial) {
            const auto seed = derive_seed(integer(p, "seed"), {stream::trial, trial});
            const auto out = reject ? rejection_simulate(t, m, signal, seed) : pfr_simulate(params, m, signal, seed);
            overflows += out.overflow() ? 1 : 0;
            if (sink && integer(p, "per-trial") != 0) {
                Json line;
                line["trial"] = trial;
                line["protocol"] = to_string(out.protocol);
                line["K"] = out.selected ? Json(*out.selected) : Json(nullptr);
                line["overflow"] = out.overflow();
                line["params"] = p;
                sink(line);
            }
        }
        const double rate = static_cast<double>(overflows) / static_cast<double>(trials);
        r.value = rate;
        r.stderr_ = bernoulli_stderr(rate, trials);
        r.trials = trials;
        r.extra["bound"] = reject ? rejection_bound(t, static_cast<double>(m)) : pfr_bound(params, m);
    } else if (name == "chansim-bound") {
        r.value = rejection_bound(real(p, "T"), static_cast<double>(integer(p, "M")));
        if (real(p, "eps") > 0.0) r.extra["m_sim_upper"] = m_sim_upper(real(p, "T"), real(p, "eps"));
    } else if (name == "gaussian-approx") {
        r.value = gaussian_approx_log_m(div(p, "L"), real(p, "alpha"), real(p, "T"), real(p, "eps"));
    } else if (name == "sandwich") {
        const double t = real(p, "T");
        const auto m = static_cast<double>(integer(p, "M"));
        const auto [lo, hi] = correctness_sandwich(t, m);
        r.value = lo;
        r.extra["upper"] = hi;
        r.extra["correct"] = correct_probability_perfect(t, m);
    } else {
        throw Error(ErrorCode::invalid_input, "unknown operation '" + name + "'");
    }
    return r;
}

// ---------------------------------------------------------------------------
// Plot data

/// CSV with one row per record. Columns: the operation's parameters, then
/// value, stderr, trials, then its scalar extras; documented in '#' lines.
/// A "trials" parameter shares the trials column (the record's count wins).
inline void emit_plot_data(const std::vector<Record>& records, const std::string& kind, std::ostream& out)
{
    const OpSpec* op = find_op(kind);
    ocpc::detail::require(op != nullptr, ErrorCode::invalid_input, "unknown plot kind '" + kind + "'");
    for (const auto& r : records)
        ocpc::detail::require(r.op == kind, ErrorCode::invalid_input,
                              "plot data needs records of one operation; got '" + r.op + "' in a '" + kind +
                                  "' table");

    std::vector<std::string> columns;
    out << "# ocpc plot data: " << kind << " (" << op->help << ")\n";
    const auto is_result = [](const std::string& c) { return c == "value" || c == "stderr" || c == "trials"; };
    for (const auto& p : op->params) {
        if (!is_result(p.name)) columns.push_back(p.name);
        out << "# " << p.name << ": " << p.help << "\n";
    }
    out << "# value: operation result; stderr: Monte Carlo standard error (empty if exact); trials: sample count\n";
    columns.insert(columns.end(), {"value", "stderr", "trials"});
    for (const auto& e : op->scalar_extras) {
        columns.push_back(e);
        out << "# " << e << ": extra output\n";
    }

    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << "\n";

    auto cell_impl = [](auto& self, const Json& v) -> std::string {
        if (v.is_null()) return "";
        if (v.is_array()) {
            std::string s;
            for (const auto& x : v) s += (s.empty() ? "" : ";") + self(self, x);
            return s;
        }
        if (v.is_string()) return v.get<std::string>();
        if (v.is_number_float()) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.12g", v.get<double>());
            return buf;
        }
        return v.dump();
    };
    auto cell = [&](const Json& v) { return cell_impl(cell_impl, v); };
    for (const auto& r : records) {
        const Json j = to_json(r);
        for (std::size_t i = 0; i < columns.size(); ++i) {
            const auto& c = columns[i];
            Json v;
            if (is_result(c) && j.contains(c)) v = j[c];
            else if (j["params"].contains(c)) v = j["params"][c];
            else if (j.contains(c)) v = j[c];
            out << (i ? "," : "") << cell(v);
        }
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// Sweeps

/// JSON mirror of a sweep: {"operation", "grid": {param: [values...]},
/// "fixed": {param: value}, "trials", "seed", "output", "format"}.
struct ExperimentConfig {
    std::string operation;
    std::vector<std::pair<std::string, std::vector<Json>>> grid;
    Json fixed = Json::object();
    std::optional<std::uint64_t> trials;
    std::optional<std::uint64_t> seed;
    std::string output;
    std::string format = "json";

    static ExperimentConfig parse(const Json& j)
    {
        ExperimentConfig c;
        try {
            c.operation = j.at("operation").get<std::string>();
            const OpSpec* op = find_op(c.operation);
            ocpc::detail::require(op != nullptr && c.operation != "sweep", ErrorCode::invalid_input,
                                  "config: unknown operation '" + c.operation + "'");
            ocpc::detail::require(j.contains("grid") && j["grid"].is_object() && !j["grid"].empty(),
                                  ErrorCode::invalid_input, "config: grid must be a nonempty object");
            for (const auto& [k, v] : j["grid"].items()) {
                ocpc::detail::require(v.is_array() && !v.empty(), ErrorCode::invalid_input,
                                      "config: grid entry '" + k + "' must be a nonempty list");
                c.grid.emplace_back(k, std::vector<Json>(v.begin(), v.end()));
            }
            if (j.contains("fixed")) c.fixed = j["fixed"];
            if (j.contains("trials")) {
                c.trials = j["trials"].get<std::uint64_t>();
                ocpc::detail::require(*c.trials >= 1, ErrorCode::invalid_input, "config: trials must be >= 1");
            }
            if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
            if (j.contains("output")) c.output = j["output"].get<std::string>();
            if (j.contains("format")) c.format = j["format"].get<std::string>();
            ocpc::detail::require(c.format == "json" || c.format == "csv", ErrorCode::invalid_input,
                                  "config: format must be json or csv");
            ocpc::detail::require(!op->stochastic || c.seed.has_value(), ErrorCode::invalid_input,
                                  "config: operation '" + c.operation + "' is stochastic and needs a seed");
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::invalid_input, std::string("config: ") + e.what());
        }
        return c;
    }

    static ExperimentConfig load(const std::string& path)
    {
        std::ifstream in(path);
        ocpc::detail::require(in.good(), ErrorCode::invalid_input, "config not found: " + path);
        try {
            return parse(Json::parse(in));
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::invalid_input, "config " + path + " is not valid JSON: " + e.what());
        }
    }

    /// Grid points in row-major order (first grid key varies slowest).
    std::vector<Json> points() const
    {
        std::vector<Json> out{fixed};
        for (const auto& [key, values] : grid) {
            std::vector<Json> next;
            for (const auto& base : out)
                for (const auto& v : values) {
                    Json p = base;
                    p[key] = v;
                    next.push_back(std::move(p));
                }
            out = std::move(next);
        }
        for (auto& p : out) {
            if (trials) p["trials"] = *trials;
            if (seed) p["seed"] = *seed;
        }
        return out;
    }
};

/// Evaluates every grid point on a worker pool; results keep grid order.
inline std::vector<Record> run_sweep(const ExperimentConfig& config)
{
    const OpSpec* op = find_op(config.operation);
    std::vector<Json> points = config.points();
    for (auto& p : points) {
        if (!std::any_of(op->params.begin(), op->params.end(), [](const auto& s) { return s.name == "trials"; }))
            p.erase("trials");
        if (!std::any_of(op->params.begin(), op->params.end(), [](const auto& s) { return s.name == "seed"; }))
            p.erase("seed");
        if (std::any_of(op->params.begin(), op->params.end(), [](const auto& s) { return s.name == "per-trial"; }))
            p["per-trial"] = 0;
        p = complete_params(*op, p);
    }
    std::vector<std::future<Record>> jobs;
    jobs.reserve(points.size());
    for (const auto& p : points) jobs.push_back(std::async(std::launch::async, [op, p] { return evaluate(*op, p); }));
    std::vector<Record> out;
    out.reserve(jobs.size());
    for (auto& j : jobs) out.push_back(j.get());
    return out;
}

// ---------------------------------------------------------------------------
// Entry point

/// Writes records as JSON lines or CSV.
inline void write_records(const std::vector<Record>& records, const std::string& kind, const std::string& format,
                          std::ostream& out)
{
    if (format == "csv") {
        emit_plot_data(records, kind, out);
        return;
    }
    for (const auto& r : records) out << to_json(r).dump() << "\n";
}

/// Parses `args` (without the program name), runs the subcommand and writes
/// its records. Returns 0 on success, 1 on a domain or input error, 2 on a
/// usage error.
inline int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Numerical laboratory for the one-cold Poisson channel", "ocpc"};
    app.require_subcommand(1);
    std::string format = "json";
    std::string output;
    app.add_option("--format", format, "output format: json (JSON lines) or csv")
        ->check(CLI::IsMember({"json", "csv"}));
    app.add_option("--out", output, "write records to this file instead of stdout");

    struct Bound {
        const OpSpec* op;
        CLI::App* sub;
        std::vector<std::pair<const ParamSpec*, std::string>> values;
    };
    std::vector<Bound> bound;
    bound.reserve(operations().size());
    for (const auto& op : operations()) {
        auto* sub = app.add_subcommand(op.name, op.help);
        bound.push_back({&op, sub, {}});
        auto& b = bound.back();
        b.values.reserve(op.params.size());
        for (const auto& p : op.params) {
            b.values.emplace_back(&p, std::string{});
            std::string desc = p.help;
            if (p.fallback) desc += " [default: " + *p.fallback + "]";
            sub->add_option("--" + p.name, b.values.back().second, desc);
        }
        sub->add_option("--format", format, "output format: json or csv")->check(CLI::IsMember({"json", "csv"}));
        sub->add_option("--out", output, "output file");
    }
    std::string config_path;
    auto* sweep = app.add_subcommand("sweep", "run a parameter grid from a JSON config");
    sweep->add_option("--config", config_path, "sweep configuration file")->required();
    sweep->add_option("--format", format, "override the config's format")->check(CLI::IsMember({"json", "csv"}));
    sweep->add_option("--out", output, "override the config's output path");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        std::ostringstream buffer;
        std::string kind;
        std::vector<Record> records;

        if (sweep->parsed()) {
            const auto config = ExperimentConfig::load(config_path);
            if (sweep->get_option("--format")->empty() && app.get_option("--format")->empty())
                format = config.format;
            if (output.empty()) output = config.output;
            kind = config.operation;
            records = run_sweep(config);
        } else {
            const Bound* chosen = nullptr;
            for (const auto& b : bound)
                if (b.sub->parsed()) chosen = &b;
            Json params = Json::object();
            for (const auto& [spec, text] : chosen->values)
                if (chosen->sub->count("--" + spec->name) > 0) params[spec->name] = parse_param(*spec, text);
            params = complete_params(*chosen->op, params);
            kind = chosen->op->name;
            TrialSink sink;
            if (format == "json") sink = [&](const Json& line) { buffer << rounded(line).dump() << "\n"; };
            records.push_back(evaluate(*chosen->op, params, sink));
        }

        write_records(records, kind, format, buffer);
        if (output.empty()) {
            out << buffer.str();
        } else {
            std::ofstream file(output);
            ocpc::detail::require(file.good(), ErrorCode::invalid_input, "cannot open output file " + output);
            file << buffer.str();
        }
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace ocpc::cli
