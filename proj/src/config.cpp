#include <reflev/config.hpp>

#include <reflev/errors.hpp>
#include <reflev/parallel.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace reflev {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& key, const std::string& what) {
    throw ConfigError("config key '" + key + "': " + what);
}

std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* k) { return item.key() == k; });
        if (!known) fail(join(path, item.key()), "unknown key");
    }
}

double number(const json& obj, const std::string& path, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) fail(join(path, key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(join(path, key), "must be finite");
    return x;
}

double required_number(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) fail(join(path, key), "missing");
    return number(obj, path, key, 0.0);
}

std::uint64_t count(const json& obj, const std::string& path, const char* key, std::uint64_t fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number()) {
        const double x = v.get<double>();
        if (x >= 0.0 && x == std::floor(x) && x < 1.8e19) return static_cast<std::uint64_t>(x);
    }
    fail(join(path, key), "expected a nonnegative integer");
}

std::string text(const json& obj, const std::string& path, const char* key, const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) fail(join(path, key), "expected a string");
    return v.get<std::string>();
}

bool flag(const json& obj, const std::string& path, const char* key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean()) fail(join(path, key), "expected true or false");
    return v.get<bool>();
}

JumpLaw parse_jump(const json& j) {
    const std::string path = "model.jump";
    require_object(j, path);
    const std::string kind = text(j, path, "kind", "");
    if (kind == "exp_up") {
        check_keys(j, path, {"kind", "rate"});
        return ExpPositive{required_number(j, path, "rate")};
    }
    if (kind == "exp_down") {
        check_keys(j, path, {"kind", "rate"});
        return ExpNegative{required_number(j, path, "rate")};
    }
    if (kind == "two_sided") {
        check_keys(j, path, {"kind", "p_up", "rate_up", "rate_down"});
        return TwoSidedExp{required_number(j, path, "p_up"), required_number(j, path, "rate_up"),
                           required_number(j, path, "rate_down")};
    }
    if (kind == "point") {
        check_keys(j, path, {"kind", "size"});
        return PointMass{required_number(j, path, "size")};
    }
    fail(path + ".kind", "expected exp_up, exp_down, two_sided or point");
}

LevyModel parse_model(const json& j) {
    const std::string path = "model";
    require_object(j, path);
    LevyModel m;
    if (j.contains("preset")) {
        const std::string preset = text(j, path, "preset", "");
        if (preset != "mm1") fail("model.preset", "only 'mm1' is known");
        check_keys(j, path, {"preset", "lambda", "mu"});
        m.drift = -1.0;
        m.intensity = required_number(j, path, "lambda");
        m.jump = ExpPositive{required_number(j, path, "mu")};
    } else {
        check_keys(j, path, {"drift", "sigma", "lambda", "jump"});
        m.drift = number(j, path, "drift", 0.0);
        m.sigma = number(j, path, "sigma", 0.0);
        m.intensity = number(j, path, "lambda", 0.0);
        if (j.contains("jump"))
            m.jump = parse_jump(j.at("jump"));
        else if (m.intensity > 0.0)
            fail("model.jump", "required when lambda > 0");
    }
    try {
        m.validate();
    } catch (const ConfigError& e) {
        fail(path, e.what());
    }
    return m;
}

PeriodicBarrier parse_barrier(const json& j) {
    const std::string path = "barrier";
    require_object(j, path);
    const std::string kind = text(j, path, "kind", "sawtooth");
    try {
        if (kind == "sawtooth") {
            check_keys(j, path, {"kind", "a"});
            return PeriodicBarrier::sawtooth(number(j, path, "a", 1.0));
        }
        if (kind == "three_ramp") {
            check_keys(j, path, {"kind"});
            return PeriodicBarrier::three_ramp();
        }
        if (kind == "zero") {
            check_keys(j, path, {"kind", "period"});
            return PeriodicBarrier::zero(number(j, path, "period", 1.0));
        }
        if (kind == "pieces") {
            check_keys(j, path, {"kind", "pieces"});
            if (!j.contains("pieces") || !j.at("pieces").is_array() || j.at("pieces").empty())
                fail("barrier.pieces", "expected a non-empty array");
            std::vector<BarrierPiece> pieces;
            std::size_t i = 0;
            for (const auto& p : j.at("pieces")) {
                const std::string ppath = "barrier.pieces[" + std::to_string(i++) + "]";
                require_object(p, ppath);
                check_keys(p, ppath, {"t0", "t1", "c", "b"});
                pieces.push_back({required_number(p, ppath, "t0"), required_number(p, ppath, "t1"),
                                  required_number(p, ppath, "c"), required_number(p, ppath, "b")});
            }
            return PeriodicBarrier(std::move(pieces));
        }
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        if (msg.rfind("config key", 0) == 0) throw;
        fail(path, msg);
    }
    fail("barrier.kind", "expected sawtooth, pieces, zero or three_ramp");
}

void parse_sim(const json& j, RunConfig& cfg) {
    const std::string path = "sim";
    require_object(j, path);
    check_keys(j, path,
               {"K", "K_list", "T", "T_b", "h", "scheme", "seed", "replicas", "workers", "v_bins",
                "a_bins", "batches", "initial_level", "mutation", "histogram"});
    SimConfig& s = cfg.sim;
    if (j.contains("K") && j.contains("K_list")) fail("sim.K_list", "give either K or K_list, not both");
    if (j.contains("K_list")) {
        const json& list = j.at("K_list");
        if (!list.is_array() || list.empty()) fail("sim.K_list", "expected a non-empty array of numbers");
        cfg.buffers.clear();
        for (const auto& k : list) {
            if (!k.is_number()) fail("sim.K_list", "expected a non-empty array of numbers");
            cfg.buffers.push_back(k.get<double>());
        }
    } else if (j.contains("K")) {
        cfg.buffers = {required_number(j, path, "K")};
    }
    s.horizon = number(j, path, "T", s.horizon);
    s.burn_in = number(j, path, "T_b", s.burn_in);
    s.grid_step = number(j, path, "h", s.grid_step);
    const std::string scheme = text(j, path, "scheme", s.scheme == Scheme::kEvent ? "event" : "grid");
    if (scheme == "event")
        s.scheme = Scheme::kEvent;
    else if (scheme == "grid")
        s.scheme = Scheme::kGrid;
    else
        fail("sim.scheme", "expected event or grid");
    s.seed = count(j, path, "seed", s.seed);
    cfg.replicas = count(j, path, "replicas", cfg.replicas);
    cfg.workers = count(j, path, "workers", cfg.workers);
    s.v_bins = count(j, path, "v_bins", s.v_bins);
    s.a_bins = count(j, path, "a_bins", s.a_bins);
    s.batches = count(j, path, "batches", s.batches);
    s.record_histogram = flag(j, path, "histogram", s.record_histogram);
    if (j.contains("initial_level")) s.initial_level = required_number(j, path, "initial_level");
    const std::string mutation = text(j, path, "mutation", "none");
    if (mutation == "none")
        s.mutation = Mutation::kNone;
    else if (mutation == "reversed_clamp")
        s.mutation = Mutation::kReversedClamp;
    else
        fail("sim.mutation", "expected none or reversed_clamp");
    if (cfg.replicas == 0) fail("sim.replicas", "must be positive");
}

void parse_validate(const json& j, ValidateOptions& v) {
    require_object(j, "validate");
    check_keys(j, "validate", {"martingale_replicas", "ks_samples", "integral_tolerance"});
    v.martingale_replicas = count(j, "validate", "martingale_replicas", v.martingale_replicas);
    v.ks_samples = count(j, "validate", "ks_samples", v.ks_samples);
    v.integral_tolerance = number(j, "validate", "integral_tolerance", v.integral_tolerance);
    if (v.martingale_replicas < 2) fail("validate.martingale_replicas", "must be at least 2");
    if (v.ks_samples == 0) fail("validate.ks_samples", "must be positive");
}

void parse_sweep(const json& j, SweepOptions& s) {
    require_object(j, "sweep");
    check_keys(j, "sweep", {"reference", "table"});
    s.reference = flag(j, "sweep", "reference", s.reference);
    if (j.contains("table")) s.table = text(j, "sweep", "table", "");
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "': expected key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override '" + assignment + "': empty key segment");
        if (!node->is_object()) fail(key, "cannot descend into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            // K and K_list are alternatives; the override wins over the file.
            if (key == "sim.K") node->erase("K_list");
            if (key == "sim.K_list") node->erase("K");
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

RunConfig from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config: top level must be an object");
    check_keys(doc, "", {"model", "barrier", "sim", "validate", "sweep"});
    RunConfig cfg = default_config();
    if (doc.contains("model")) cfg.model = parse_model(doc.at("model"));
    if (doc.contains("barrier")) cfg.barrier = parse_barrier(doc.at("barrier"));
    if (doc.contains("sim")) parse_sim(doc.at("sim"), cfg);
    if (doc.contains("validate")) parse_validate(doc.at("validate"), cfg.validate);
    if (doc.contains("sweep")) parse_sweep(doc.at("sweep"), cfg.sweep);

    cfg.sim.buffer = cfg.buffers.front();
    // A scheme/model mismatch is left to the commands: simulate refuses it,
    // validate reports the simulation checks as skipped.
    const bool mismatch = cfg.sim.scheme == Scheme::kEvent && cfg.model.sigma > 0.0;
    if (mismatch) cfg.warnings.push_back("event scheme requires sigma = 0; simulation will be refused");
    for (double k : cfg.buffers) {
        SimConfig probe = cfg.sim_at(k);
        if (mismatch) probe.scheme = Scheme::kGrid;
        try {
            probe.validate(cfg.model, cfg.barrier);
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("config key 'sim': ") + e.what());
        }
    }
    if (cfg.sim.scheme == Scheme::kGrid) {
        double scale = cfg.barrier.period();
        if (cfg.model.has_jumps()) scale = std::min(scale, 1.0 / cfg.model.intensity);
        if (cfg.sim.grid_step > 1e-2 * scale)
            cfg.warnings.push_back("grid step h exceeds 1e-2 * min(1/lambda, period); expect O(h) bias");
    }
    return cfg;
}

}  // namespace

std::size_t RunConfig::resolved_workers() const { return workers > 0 ? workers : default_worker_count(); }

SimConfig RunConfig::sim_at(double buffer) const {
    SimConfig s = sim;
    s.buffer = buffer;
    return s;
}

RunConfig default_config() {
    RunConfig cfg;
    cfg.model.drift = -1.0;
    cfg.model.intensity = 1.0;
    cfg.model.jump = ExpPositive{2.0};
    cfg.barrier = PeriodicBarrier::sawtooth(1.0);
    cfg.buffers = {4.0};
    cfg.sim.buffer = 4.0;
    cfg.sim.horizon = 1e5;
    cfg.sim.seed = 1;
    return cfg;
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
    json doc = json::object();
    if (!text.empty()) {
        try {
            doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config syntax: ") + e.what());
        }
    }
    for (const auto& o : overrides) apply_override(doc, o);
    return from_json(doc);
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    if (path.empty()) return parse_config("", overrides);
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), overrides);
}

std::optional<std::pair<double, double>> as_mm1(const LevyModel& model) {
    const auto* up = std::get_if<ExpPositive>(&model.jump);
    if (!up || model.drift != -1.0 || model.sigma != 0.0 || !model.has_jumps()) return std::nullopt;
    return std::make_pair(model.intensity, up->rate);
}

std::optional<double> sawtooth_amplitude(const PeriodicBarrier& barrier) {
    const auto& p = barrier.pieces();
    if (p.size() != 1 || p[0].level != 0.0 || p[0].slope != 1.0) return std::nullopt;
    return barrier.period();
}

}  // namespace reflev
