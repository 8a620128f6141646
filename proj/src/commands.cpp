#include <reflev/commands.hpp>

#include <reflev/errors.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace reflev {

namespace {

std::string short_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        cell.erase(0, cell.find_first_not_of(" \t\r"));
        cell.erase(cell.find_last_not_of(" \t\r") + 1);
        cells.push_back(cell);
    }
    return cells;
}

std::string describe_jump(const JumpLaw& law) {
    std::ostringstream s;
    if (const auto* j = std::get_if<ExpPositive>(&law)) s << "Exp(" << j->rate << ") upward";
    if (const auto* j = std::get_if<ExpNegative>(&law)) s << "Exp(" << j->rate << ") downward";
    if (const auto* j = std::get_if<TwoSidedExp>(&law))
        s << "two-sided: p_up=" << j->p_up << ", rate_up=" << j->rate_up << ", rate_down=" << j->rate_down;
    if (const auto* j = std::get_if<PointMass>(&law)) s << "point mass at " << j->size;
    return s.str();
}

void attach_closed_form(const RunConfig& cfg, AsymptoticsReport& fit) {
    fit.c_gamma = cfg.barrier.exp_moment(fit.gamma);
    const auto mm1 = as_mm1(cfg.model);
    const auto a = sawtooth_amplitude(cfg.barrier);
    if (mm1 && a) fit.closed_form = mm1_saw_constant(mm1->first, mm1->second, *a);
}

CheckRow row(std::string name, bool pass, double value, double threshold, std::string detail = "") {
    return {std::move(name), pass ? CheckStatus::kPass : CheckStatus::kFail, value, threshold,
            std::move(detail)};
}

CheckRow skipped(std::string name, std::string reason) {
    return {std::move(name), CheckStatus::kSkip, 0.0, 0.0, std::move(reason)};
}

const char* status_text(CheckStatus s) {
    switch (s) {
        case CheckStatus::kPass: return "PASS";
        case CheckStatus::kFail: return "FAIL";
        case CheckStatus::kSkip: return "SKIP";
    }
    return "?";
}

}  // namespace

std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_loss_csv(std::ostream& out, const std::vector<LossRateReport>& reports) {
    out << "K,l_K,ci,lK_cont,lK_jump,l_A,ci_A\n";
    for (const auto& r : reports)
        out << format_number(r.buffer) << ',' << format_number(r.loss.rate) << ','
            << format_number(r.loss.half_width) << ',' << format_number(r.loss.continuous) << ','
            << format_number(r.loss.jump) << ',' << format_number(r.lower.rate) << ','
            << format_number(r.lower.half_width) << '\n';
}

void write_hist_csv(std::ostream& out, const StationaryHistogram& hist) {
    out << "v_lo,v_hi,a_lo,a_hi,mass\n";
    for (std::size_t i = 0; i < hist.rows(); ++i)
        for (std::size_t j = 0; j < hist.a_bins(); ++j) {
            const auto [v_lo, v_hi] = hist.v_range(i, j);
            const auto [a_lo, a_hi] = hist.a_range(j);
            out << format_number(v_lo) << ',' << format_number(v_hi) << ',' << format_number(a_lo)
                << ',' << format_number(a_hi) << ',' << format_number(hist.mass(i, j)) << '\n';
        }
}

void write_asymptotics_csv(std::ostream& out, const AsymptoticsReport& report) {
    out << "K,loss_rate,ci,log_resid\n";
    for (std::size_t i = 0; i < report.points.size(); ++i) {
        const auto& p = report.points[i];
        out << format_number(p.buffer) << ',' << format_number(p.rate) << ','
            << format_number(p.half_width) << ',' << format_number(report.log_residuals[i]) << '\n';
    }
}

std::vector<LossPoint> read_loss_table(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("loss table: empty input");
    const auto header = split_csv_line(line);
    auto column = [&](std::initializer_list<const char*> names) -> std::size_t {
        for (const char* n : names) {
            const auto it = std::find(header.begin(), header.end(), n);
            if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
        }
        throw ConfigError(std::string("loss table: missing column ") + *names.begin());
    };
    const std::size_t k_col = column({"K"});
    const std::size_t rate_col = column({"loss_rate", "l_K"});
    const std::size_t ci_col = column({"ci"});

    std::vector<LossPoint> points;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_csv_line(line);
        const std::size_t need = std::max({k_col, rate_col, ci_col});
        if (cells.size() <= need) throw ConfigError("loss table line " + std::to_string(line_no) + ": too few columns");
        try {
            points.push_back({std::stod(cells[k_col]), std::stod(cells[rate_col]), std::stod(cells[ci_col])});
        } catch (const std::logic_error&) {
            throw ConfigError("loss table line " + std::to_string(line_no) + ": not a number");
        }
    }
    return points;
}

void require_stationary(const LevyModel& model) {
    const double m = mean_x1(model);
    if (!(m < 0.0))
        throw ConfigError("E X_1 >= 0 (E X_1 = " + short_number(m) + "): no stationary regime");
}

SimulationResult run_simulation(const RunConfig& cfg, double buffer) {
    require_stationary(cfg.model);
    const SimConfig sim = cfg.sim_at(buffer);
    SimulationResult r;
    r.totals = run_replicas(cfg.model, cfg.barrier, sim, cfg.replicas, cfg.resolved_workers());
    r.report = loss_rate_report(r.totals, sim, cfg.replicas);
    return r;
}

SweepResult run_sweep(const RunConfig& cfg) {
    SweepResult out;
    require_stationary(cfg.model);
    const double gamma = lundberg_root(cfg.model);
    if (cfg.sweep.table) {
        std::ifstream in(*cfg.sweep.table);
        if (!in) throw ConfigError("cannot open loss table '" + *cfg.sweep.table + "'");
        out.fit = fit_asymptote(read_loss_table(in), gamma);
        attach_closed_form(cfg, out.fit);
        return out;
    }

    const std::set<double> distinct(cfg.buffers.begin(), cfg.buffers.end());
    if (distinct.size() < 4) throw ConfigError("sweep needs at least 4 distinct K values in sim.K_list");

    RunConfig run = cfg;
    run.sim.record_histogram = false;
    const std::size_t workers = cfg.resolved_workers();
    const double a = cfg.barrier.amplitude();
    std::vector<LossPoint> table;
    std::vector<LossPoint> reference_table;
    for (double k : cfg.buffers) {
        out.reports.push_back(run_simulation(run, k).report);
        table.push_back({k, out.reports.back().loss.rate, out.reports.back().loss.half_width});
        if (cfg.sweep.reference) {
            const SimConfig sim = run.sim_at(k);
            out.reference_at_k.push_back(
                constant_barrier_reference(cfg.model, k, sim, cfg.replicas, workers));
            out.reference_below.push_back(
                constant_barrier_reference(cfg.model, k - a, sim, cfg.replicas, workers));
            const auto& ref = out.reference_at_k.back();
            reference_table.push_back({k, ref.loss.rate, ref.loss.half_width});
        }
    }
    out.fit = fit_asymptote(table, gamma);
    attach_closed_form(cfg, out.fit);
    if (cfg.sweep.reference) out.reference_fit = fit_asymptote(reference_table, gamma);
    return out;
}

std::vector<CheckRow> run_validation(const RunConfig& cfg) {
    require_stationary(cfg.model);
    std::vector<CheckRow> rows;
    const double k = cfg.buffers.front();
    const double gamma = lundberg_root(cfg.model);
    const std::size_t workers = cfg.resolved_workers();

    const double s = cfg.barrier.period();
    const double phase_times[] = {0.0, 0.37 * s, 0.81 * s};
    for (std::size_t i = 0; i < 3; ++i) {
        const double ks =
            phase_sample_ks(cfg.barrier, phase_times[i], cfg.validate.ks_samples, cfg.sim.seed + i);
        rows.push_back(row("phase_law_ks[t=" + short_number(phase_times[i]) + "]", ks < 0.015, ks, 0.015));
    }

    const SimConfig sim = cfg.sim_at(k);
    try {
        sim.validate(cfg.model, cfg.barrier);
    } catch (const ConfigError& e) {
        for (const char* name : {"containment", "regulator_monotonicity", "pathwise_balance", "balance",
                                 "barrier_work", "phase_marginal_ks", "sandwich", "loss_integral",
                                 "martingale", "mutation_detected"})
            rows.push_back(skipped(name, e.what()));
        return rows;
    }

    const SimulationResult res = run_simulation(cfg, k);
    const PathAccumulators& acc = res.totals;

    const double contain_tol = 1e-9 * std::max(1.0, k);
    rows.push_back(row("containment", acc.containment_violation <= contain_tol, acc.containment_violation,
                       contain_tol, "largest excursion outside [A, K]"));
    rows.push_back(row("regulator_monotonicity", acc.negative_regulations == 0,
                       static_cast<double>(acc.negative_regulations), 0.0, "negative regulator increments"));
    const double rel_balance = std::abs(acc.balance_residual()) / std::max(1.0, acc.balance_scale());
    rows.push_back(row("pathwise_balance", rel_balance <= 1e-9, rel_balance, 1e-9,
                       "|V_T - V_0 - X - L^A + L^K| relative"));
    if (cfg.model.sigma == 0.0 && cfg.model.drift <= 0.0)
        rows.push_back(row("upper_continuous_zero", acc.upper_continuous == 0.0, acc.upper_continuous, 0.0,
                           "no continuous push at K without upward drift"));

    const ResidualCheck balance = balance_check(acc, cfg.model);
    rows.push_back(row("balance", balance.pass, balance.residual, 3.0 * balance.standard_error,
                       "l_A - l_K + E X_1"));
    const ResidualCheck work = barrier_work_check(acc, cfg.barrier);
    rows.push_back(row("barrier_work", work.pass, work.residual, 3.0 * work.standard_error,
                       "time-average of int A dL^A minus E A_0 l_A"));

    std::optional<StationaryHistogram> hist;
    if (sim.record_histogram) hist.emplace(stationary_histogram(acc));
    if (hist) {
        const double ks = phase_marginal_ks(*hist, cfg.barrier);
        rows.push_back(row("phase_marginal_ks", ks < 0.02, ks, 0.02, "A-marginal of the occupation vs xi"));
    } else {
        rows.push_back(skipped("phase_marginal_ks", "histogram disabled"));
    }

    const double a = cfg.barrier.amplitude();
    const auto ref_k = constant_barrier_reference(cfg.model, k, sim, cfg.replicas, workers);
    const auto ref_below = constant_barrier_reference(cfg.model, k - a, sim, cfg.replicas, workers);
    rows.push_back(row("sandwich_lower", not_below(res.report.loss, ref_k.loss), ref_k.loss.rate,
                       res.report.loss.rate, "flat barrier at K must not exceed l_K"));
    rows.push_back(row("sandwich_upper", not_below(ref_below.loss, res.report.loss), ref_below.loss.rate,
                       res.report.loss.rate, "flat barrier at K - a must not be below l_K"));

    if (hist) {
        const LossIntegralTerms li = loss_integral_rate({cfg.model, cfg.barrier, k, *hist});
        const double mc = res.report.loss.rate;
        const double rel = std::abs(li.loss_rate - mc) / mc;
        const double corrected = li.loss_rate_with_barrier_work(cfg.model, k, acc.barrier_work / acc.duration);
        rows.push_back(row("loss_integral", rel <= cfg.validate.integral_tolerance, rel, cfg.validate.integral_tolerance,
                           "formula " + short_number(li.loss_rate) + " vs simulation " + short_number(mc) +
                               "; with measured barrier work " + short_number(corrected)));
    } else {
        rows.push_back(skipped("loss_integral", "histogram disabled"));
    }

    const std::size_t n = cfg.validate.martingale_replicas;
    for (double alpha : {0.5 * gamma, gamma}) {
        const ZeroMeanTest z = martingale_zero_mean(cfg.model, cfg.barrier, sim, alpha, n, workers);
        rows.push_back(row("martingale[alpha=" + short_number(alpha) + "]", z.pass, z.mean,
                           3.0 * z.standard_error, "mean of M_1 over " + std::to_string(n) + " replicas"));
    }
    if (sim.mutation != Mutation::kNone) {
        rows.push_back(skipped("mutation_detected", "simulator already mutated"));
    } else {
        SimConfig mutant = sim;
        mutant.mutation = Mutation::kReversedClamp;
        bool detected = false;
        double worst = 0.0;
        for (double alpha : {0.5 * gamma, gamma}) {
            const ZeroMeanTest z = martingale_zero_mean(cfg.model, cfg.barrier, mutant, alpha, n, workers);
            detected = detected || !z.pass;
            if (z.standard_error > 0.0) worst = std::max(worst, std::abs(z.mean) / z.standard_error);
        }
        rows.push_back(row("mutation_detected", detected, worst, 3.0,
                           "largest |mean|/SE of the reversed-clamp build"));
    }
    return rows;
}

int cmd_model_info(const RunConfig& cfg, std::ostream& out) {
    const LevyModel& m = cfg.model;
    const ExponentDomain dom = exponent_domain(m);
    const double mean = mean_x1(m);
    nlohmann::ordered_json summary;

    out << "model\n"
        << "  drift        " << m.drift << "\n"
        << "  sigma        " << m.sigma << "\n"
        << "  lambda       " << m.intensity << "\n";
    if (m.has_jumps()) out << "  jumps        " << describe_jump(m.jump) << "\n";
    out << "  E X_1        " << mean << "\n"
        << "  Theta        (" << dom.lo << ", " << dom.hi << ")\n";
    summary["E_X1"] = mean;
    summary["theta"] = {std::isfinite(dom.lo) ? nlohmann::json(dom.lo) : nlohmann::json("-inf"),
                        std::isfinite(dom.hi) ? nlohmann::json(dom.hi) : nlohmann::json("inf")};

    std::optional<double> gamma;
    if (mean < 0.0) {
        try {
            gamma = lundberg_root(m);
        } catch (const NoRootError& e) {
            out << "  gamma        none (" << e.what() << ")\n";
        }
    } else {
        out << "  gamma        none: E X_1 >= 0, stationarity-requiring commands will refuse this model\n";
    }
    if (gamma) {
        out << "  gamma        " << format_number(*gamma) << "\n";
        summary["gamma"] = *gamma;
    }

    const double top = std::isfinite(dom.hi) ? 0.95 * dom.hi : (gamma ? 2.0 * *gamma : 1.0);
    out << "  kappa table\n";
    nlohmann::json table = nlohmann::json::array();
    for (int i = 0; i <= 8; ++i) {
        const double alpha = top * i / 8.0;
        const double value = kappa(m, alpha);
        out << "    alpha=" << short_number(alpha) << "  kappa=" << short_number(value) << "\n";
        table.push_back({alpha, value});
    }
    summary["kappa"] = table;

    const PeriodicBarrier& b = cfg.barrier;
    out << "barrier\n"
        << "  pieces       " << b.pieces().size() << "\n"
        << "  period       " << b.period() << "\n"
        << "  amplitude    " << b.amplitude() << "\n"
        << "  E A_0        " << b.mean_level() << "\n";
    summary["E_A0"] = b.mean_level();
    summary["amplitude"] = b.amplitude();
    if (gamma) {
        const double c = b.exp_moment(*gamma);
        out << "  C_gamma      " << format_number(c) << "\n";
        summary["C_gamma"] = c;
    }

    const auto mm1 = as_mm1(m);
    const auto a = sawtooth_amplitude(b);
    if (mm1 && a && mm1->first < mm1->second) {
        const auto d = mm1_saw_constant(mm1->first, mm1->second, *a);
        out << "M/M/1 sawtooth constant\n"
            << "  D printed    " << format_number(d.printed) << "\n"
            << "  D assembled  " << format_number(d.assembled) << "\n";
        summary["D_printed"] = d.printed;
        summary["D_assembled"] = d.assembled;
    }
    for (const auto& w : cfg.warnings) out << "warning: " << w << "\n";
    out << "summary " << summary.dump() << "\n";
    return kExitPass;
}

int cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out) {
    if (cfg.buffers.size() != 1) throw ConfigError("simulate takes a single sim.K; use sweep for K_list");
    for (const auto& w : cfg.warnings) out << "warning: " << w << "\n";
    const SimulationResult res = run_simulation(cfg, cfg.buffers.front());
    const LossRateReport& r = res.report;

    std::filesystem::create_directories(out_dir);
    {
        auto f = open_output(out_dir / "loss.csv");
        write_loss_csv(f, {r});
    }
    if (cfg.sim.record_histogram) {
        auto f = open_output(out_dir / "hist.csv");
        write_hist_csv(f, stationary_histogram(res.totals));
    }

    out << "K            " << format_number(r.buffer) << "\n"
        << "l_K          " << format_number(r.loss.rate) << " +- " << format_number(r.loss.half_width) << "\n"
        << "  continuous " << format_number(r.loss.continuous) << "\n"
        << "  jump       " << format_number(r.loss.jump) << "\n"
        << "l_A          " << format_number(r.lower.rate) << " +- " << format_number(r.lower.half_width) << "\n"
        << "horizon      " << format_number(r.effective_horizon) << " (" << r.replicas << " replicas, "
        << r.batch_count << " batches)\n"
        << "seed         " << r.seed << "\n";
    for (const auto& w : r.warnings) out << "warning: " << w << "\n";
    return kExitPass;
}

int cmd_sweep(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out) {
    for (const auto& w : cfg.warnings) out << "warning: " << w << "\n";
    const SweepResult res = run_sweep(cfg);
    std::filesystem::create_directories(out_dir);
    if (!res.reports.empty()) {
        auto f = open_output(out_dir / "loss.csv");
        write_loss_csv(f, res.reports);
    }
    if (!res.reference_at_k.empty()) {
        auto f = open_output(out_dir / "reference.csv");
        std::vector<LossRateReport> all = res.reference_at_k;
        all.insert(all.end(), res.reference_below.begin(), res.reference_below.end());
        write_loss_csv(f, all);
    }
    {
        auto f = open_output(out_dir / "asymptotics.csv");
        write_asymptotics_csv(f, res.fit);
    }

    const AsymptoticsReport& fit = res.fit;
    nlohmann::ordered_json summary;
    summary["gamma"] = fit.gamma;
    if (fit.c_gamma) summary["C_gamma"] = *fit.c_gamma;
    summary["D_hat"] = fit.fixed_intercept;
    summary["free_slope"] = fit.free_slope;
    summary["free_intercept"] = fit.free_intercept;
    summary["points_used"] = fit.points.size();
    if (fit.closed_form) {
        summary["D_printed"] = fit.closed_form->printed;
        summary["D_assembled"] = fit.closed_form->assembled;
    }
    if (res.reference_fit) {
        const double d0 = res.reference_fit->fixed_intercept;
        const double a = cfg.barrier.amplitude();
        summary["D0_hat"] = d0;
        summary["D0_hat_upper"] = d0 * std::exp(fit.gamma * a);
        nlohmann::json sandwich = nlohmann::json::array();
        for (std::size_t i = 0; i < res.reports.size(); ++i)
            sandwich.push_back({{"K", res.reports[i].buffer},
                                {"lower_ok", not_below(res.reports[i].loss, res.reference_at_k[i].loss)},
                                {"upper_ok", not_below(res.reference_below[i].loss, res.reports[i].loss)}});
        summary["sandwich"] = sandwich;
        if (fit.closed_form)
            summary["supported_route"] =
                supported_route(*fit.closed_form, fit.fixed_intercept, d0, fit.gamma, a);
    }
    for (const auto& r : res.reports)
        for (const auto& w : r.warnings) out << "warning: " << w << "\n";
    out << "summary " << summary.dump(2) << "\n";
    return kExitPass;
}

int cmd_validate(const RunConfig& cfg, std::ostream& out) {
    for (const auto& w : cfg.warnings) out << "warning: " << w << "\n";
    const auto rows = run_validation(cfg);
    bool failed = false;
    for (const auto& r : rows) {
        char line[256];
        std::snprintf(line, sizeof line, "%-28s %-4s ", r.name.c_str(), status_text(r.status));
        out << line;
        if (r.status == CheckStatus::kSkip)
            out << "(" << r.detail << ")";
        else
            out << "value=" << short_number(r.value) << " limit=" << short_number(r.threshold) << "  " << r.detail;
        out << "\n";
        failed = failed || r.status == CheckStatus::kFail;
    }
    return failed ? kExitValidation : kExitPass;
}

}  // namespace reflev
