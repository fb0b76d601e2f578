#include "symmlp/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

namespace symmlp {

using nlohmann::json;

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

bool all_finite(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double x) { return std::isfinite(x); });
}

struct Point {
    std::vector<double> w;
    std::vector<double> g;
    double f = 0.0;
    bool finite = false;
};

class Evaluator {
public:
    Evaluator(const ObjectiveFn& f, std::size_t dim) : f_(f), dim_(dim) {}

    Point at(std::span<const double> base, std::span<const double> dir, double step) {
        Point p;
        p.w.resize(dim_);
        for (std::size_t i = 0; i < dim_; ++i) p.w[i] = base[i] + step * dir[i];
        p.g.assign(dim_, 0.0);
        p.f = f_(p.w, p.g);
        ++count;
        p.finite = std::isfinite(p.f) && all_finite(p.g);
        return p;
    }

    std::size_t count = 0;

private:
    const ObjectiveFn& f_;
    std::size_t dim_;
};

// Finds a step along `dir` satisfying f(x + a d) <= f(x) + c a g.d.
std::optional<std::pair<Point, double>> line_search(Evaluator& eval, const Point& x, std::span<const double> dir,
                                                    double slope, double initial_step, double c) {
    constexpr int kMaxHalvings = 60;
    double step = initial_step;
    Point trial = eval.at(x.w, dir, step);
    for (int k = 0; k < kMaxHalvings && !trial.finite; ++k) {
        step *= 0.5;
        trial = eval.at(x.w, dir, step);
    }
    if (!trial.finite) return std::nullopt;

    auto armijo = [&](const Point& p, double a) { return p.f <= x.f + c * a * slope; };

    // Minimizer of the quadratic through phi(0), phi'(0), phi(step).
    const double curvature = trial.f - x.f - slope * step;
    if (curvature > 0.0) {
        const double guess = -slope * step * step / (2.0 * curvature);
        if (std::isfinite(guess) && guess > 0.0 && guess != step) {
            Point refined = eval.at(x.w, dir, guess);
            if (refined.finite && armijo(refined, guess) && (refined.f <= trial.f || !armijo(trial, step)))
                return std::make_pair(std::move(refined), guess);
            if (!armijo(trial, step) && refined.finite && guess < step) {
                trial = std::move(refined);
                step = guess;
            }
        }
    }
    for (int k = 0; k < kMaxHalvings; ++k) {
        if (trial.finite && armijo(trial, step)) return std::make_pair(std::move(trial), step);
        double next = 0.5 * step;
        if (trial.finite) {
            const double curv = trial.f - x.f - slope * step;
            if (curv > 0.0) {
                const double guess = -slope * step * step / (2.0 * curv);
                next = std::clamp(guess, 0.1 * step, 0.5 * step);
            }
        }
        step = next;
        trial = eval.at(x.w, dir, step);
    }
    return std::nullopt;
}

}  // namespace

std::string_view to_string(Optimizer o) {
    switch (o) {
        case Optimizer::ConjugateGradient: return "conjugate_gradient";
        case Optimizer::Bfgs: return "bfgs";
        case Optimizer::GradientDescent: return "gradient_descent";
    }
    return "?";
}

Optimizer optimizer_from_string(std::string_view name) {
    for (auto o : {Optimizer::ConjugateGradient, Optimizer::Bfgs, Optimizer::GradientDescent})
        if (to_string(o) == name) return o;
    throw OptimizationError("unknown optimizer '" + std::string(name) + "'");
}

std::string_view to_string(StopReason r) {
    switch (r) {
        case StopReason::GradientTolerance: return "gradient_tolerance";
        case StopReason::MaxIterations: return "max_iterations";
        case StopReason::EarlyStopping: return "early_stopping";
        case StopReason::LineSearchFailure: return "line_search_failure";
        case StopReason::NonFinite: return "non_finite";
    }
    return "?";
}

MinimizeResult minimize(const ObjectiveFn& f, std::vector<double> w0, const MinimizeOptions& options,
                        const IterationCallback& callback) {
    const std::size_t dim = w0.size();
    Evaluator eval(f, dim);
    std::vector<double> zero(dim, 0.0);
    Point x = eval.at(w0, zero, 0.0);
    if (!x.finite) throw OptimizationError("objective is not finite at the starting point");

    MinimizeResult result;
    result.values.push_back(x.f);

    std::vector<double> dir(dim), prev_g, prev_dir;
    std::vector<double> inv_hessian;  // BFGS only, row-major dim x dim
    double prev_slope = 0.0, prev_step = 0.0;
    std::size_t since_restart = 0;
    bool steepest = true;

    auto reset_steepest = [&] {
        for (std::size_t i = 0; i < dim; ++i) dir[i] = -x.g[i];
        steepest = true;
        since_restart = 0;
    };

    result.reason = StopReason::MaxIterations;
    std::size_t iter = 0;
    for (;;) {
        if (norm(x.g) <= options.gradient_tolerance) {
            result.reason = StopReason::GradientTolerance;
            break;
        }
        if (iter >= options.max_iterations) {
            result.reason = StopReason::MaxIterations;
            break;
        }

        switch (options.optimizer) {
            case Optimizer::GradientDescent: reset_steepest(); break;
            case Optimizer::ConjugateGradient:
                if (prev_g.empty() || since_restart >= dim) {
                    reset_steepest();
                } else {
                    double num = 0.0;
                    for (std::size_t i = 0; i < dim; ++i) num += x.g[i] * (x.g[i] - prev_g[i]);
                    const double beta = std::max(0.0, num / dot(prev_g, prev_g));
                    for (std::size_t i = 0; i < dim; ++i) dir[i] = -x.g[i] + beta * prev_dir[i];
                    steepest = beta == 0.0;
                }
                break;
            case Optimizer::Bfgs:
                if (inv_hessian.empty()) {
                    reset_steepest();
                } else {
                    for (std::size_t i = 0; i < dim; ++i) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < dim; ++j) s += inv_hessian[i * dim + j] * x.g[j];
                        dir[i] = -s;
                    }
                    steepest = false;
                }
                break;
        }

        double slope = dot(x.g, dir);
        if (!(slope < 0.0)) {
            reset_steepest();
            inv_hessian.clear();
            slope = dot(x.g, dir);
        }

        double initial = 1.0;
        if (options.optimizer == Optimizer::Bfgs && !inv_hessian.empty()) initial = 1.0;
        else if (prev_step > 0.0 && prev_slope < 0.0) initial = std::min(1.0, 1.01 * 2.0 * prev_step * prev_slope / slope);
        else initial = std::min(1.0, 1.0 / norm(x.g));
        if (!(initial > 0.0) || !std::isfinite(initial)) initial = 1.0;

        auto found = line_search(eval, x, dir, slope, initial, options.armijo_c);
        if (!found && !steepest) {
            reset_steepest();
            inv_hessian.clear();
            slope = dot(x.g, dir);
            found = line_search(eval, x, dir, slope, std::min(1.0, 1.0 / norm(x.g)), options.armijo_c);
        }
        if (!found) {
            result.reason = StopReason::LineSearchFailure;
            break;
        }
        auto& [next, step] = *found;

        if (options.optimizer == Optimizer::Bfgs) {
            std::vector<double> s(dim), y(dim);
            for (std::size_t i = 0; i < dim; ++i) {
                s[i] = next.w[i] - x.w[i];
                y[i] = next.g[i] - x.g[i];
            }
            const double sy = dot(s, y);
            if (sy > 1e-12 * norm(s) * norm(y)) {
                if (inv_hessian.empty()) {
                    inv_hessian.assign(dim * dim, 0.0);
                    const double gamma = sy / dot(y, y);
                    for (std::size_t i = 0; i < dim; ++i) inv_hessian[i * dim + i] = gamma;
                }
                const double rho = 1.0 / sy;
                std::vector<double> hy(dim, 0.0);
                for (std::size_t i = 0; i < dim; ++i)
                    for (std::size_t j = 0; j < dim; ++j) hy[i] += inv_hessian[i * dim + j] * y[j];
                const double yhy = dot(y, hy);
                for (std::size_t i = 0; i < dim; ++i)
                    for (std::size_t j = 0; j < dim; ++j)
                        inv_hessian[i * dim + j] +=
                            -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
            } else {
                // No positive curvature along the step: the old estimate would repeat it, so restart.
                inv_hessian.clear();
            }
        }

        prev_g = std::move(x.g);
        prev_dir = dir;
        prev_slope = slope;
        prev_step = step;
        x = std::move(next);
        ++iter;
        ++since_restart;
        result.values.push_back(x.f);
        if (callback && !callback(iter, x.w, x.f)) {
            result.reason = StopReason::EarlyStopping;
            break;
        }
    }

    result.w = std::move(x.w);
    result.value = x.f;
    result.gradient_norm = norm(x.g);
    result.iterations = iter;
    result.evaluations = eval.count;
    return result;
}

bool EarlyStoppingMonitor::observe(std::size_t iteration, std::span<const double> w, double validation_error) {
    curve_.push_back(validation_error);
    if (validation_error < best_error_ || best_weights_.empty()) {
        best_error_ = validation_error;
        best_iteration_ = iteration;
        best_weights_.assign(w.begin(), w.end());
    }
    if (config_.enabled && iteration - best_iteration_ >= config_.patience) exhausted_ = true;
    return !exhausted_;
}

void TrainConfig::validate() const {
    if (restarts < 1) throw OptimizationError("restarts must be >= 1");
    if (!(gradient_tolerance > 0.0)) throw OptimizationError("gradient tolerance must be > 0");
    if (max_iterations < 1) throw OptimizationError("max_iterations must be >= 1");
    if (early_stopping.enabled && early_stopping.patience < 1)
        throw OptimizationError("early stopping patience must be >= 1");
    for (double b : block_weights)
        if (!(b >= 0.0)) throw OptimizationError("block weights must be non-negative");
}

json TrainConfig::to_json() const {
    return json{{"optimizer", to_string(optimizer)},
                {"max_iterations", max_iterations},
                {"gradient_tolerance", gradient_tolerance},
                {"restarts", restarts},
                {"seed", seed},
                {"decay", decay.to_json()},
                {"block_weights", block_weights},
                {"early_stopping", {{"enabled", early_stopping.enabled}, {"patience", early_stopping.patience}}}};
}

TrainConfig TrainConfig::from_json(const json& j) {
    TrainConfig c;
    if (j.contains("optimizer")) c.optimizer = optimizer_from_string(j["optimizer"].get<std::string>());
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.gradient_tolerance = j.value("gradient_tolerance", c.gradient_tolerance);
    c.restarts = j.value("restarts", c.restarts);
    c.seed = j.value("seed", c.seed);
    if (j.contains("decay")) c.decay = DecayPolicy::from_json(j["decay"]);
    c.block_weights = j.value("block_weights", std::vector<double>{});
    if (j.contains("early_stopping")) {
        const auto& e = j["early_stopping"];
        c.early_stopping.enabled = e.value("enabled", true);
        c.early_stopping.patience = e.value("patience", c.early_stopping.patience);
    }
    c.jobs = j.value("jobs", c.jobs);
    c.validate();
    return c;
}

json FitReport::to_json(bool include_timing) const {
    json restarts_json = json::array();
    for (const auto& r : restarts) {
        json entry{{"train_curve", r.train_curve},
                   {"validation_curve", r.validation_curve},
                   {"best_iteration", r.best_iteration},
                   {"best_validation_error", r.best_validation_error},
                   {"final_train_error", r.final_train_error},
                   {"iterations", r.iterations},
                   {"stop_reason", to_string(r.stop_reason)},
                   {"failed", r.failed}};
        if (!r.diagnostic.empty()) entry["diagnostic"] = r.diagnostic;
        restarts_json.push_back(std::move(entry));
    }
    json j{{"model", weights_to_json(architecture, best_weights)},
           {"best_restart", best_restart},
           {"best_validation_error", best_validation_error},
           {"restarts", std::move(restarts_json)}};
    if (include_timing) j["wall_time_seconds"] = wall_time_seconds;
    return j;
}

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    for (std::size_t t = 0; t < jobs; ++t)
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& w : workers) w.join();
    if (error) std::rethrow_exception(error);
}

FitReport train(const MlpArchitecture& arch, const Dataset& train_set, const Dataset& validation_set,
                const TrainConfig& config) {
    config.validate();
    arch.validate();
    if (train_set.size() == 0) throw OptimizationError("training set is empty");
    if (validation_set.size() == 0) throw OptimizationError("validation set is empty");
    if (train_set.inputs.cols() != arch.input_dim || validation_set.inputs.cols() != arch.input_dim)
        throw DimensionError("dataset inputs do not match the architecture");

    const auto start = std::chrono::steady_clock::now();
    const std::span<const double> block_weights(config.block_weights);
    std::vector<RestartTrace> traces(config.restarts);
    std::vector<std::vector<double>> best(config.restarts);

    parallel_for(config.restarts, config.jobs, [&](std::size_t r) {
        auto rng = make_rng(config.seed, r);
        WeightVector w = initialize_weights(arch, rng);
        WeightVector scratch = w;
        RestartTrace& trace = traces[r];
        EarlyStoppingMonitor monitor(config.early_stopping);

        auto objective = [&](std::span<const double> x, std::span<double> grad) {
            std::copy(x.begin(), x.end(), scratch.values().begin());
            auto e = regularized_empirical_error(arch, scratch, train_set, config.decay, block_weights);
            std::copy(e.gradient.begin(), e.gradient.end(), grad.begin());
            return e.value;
        };
        auto validation_at = [&](std::span<const double> x) {
            std::copy(x.begin(), x.end(), scratch.values().begin());
            return empirical_error(arch, scratch, validation_set, block_weights);
        };

        monitor.observe(0, w.values(), validation_at(w.values()));
        MinimizeOptions options{config.optimizer, config.max_iterations, config.gradient_tolerance};
        try {
            auto result = minimize(objective, w.values(), options,
                                   [&](std::size_t iteration, std::span<const double> x, double value) {
                                       (void)value;
                                       return monitor.observe(iteration, x, validation_at(x));
                                   });
            trace.train_curve = result.values;
            trace.iterations = result.iterations;
            trace.stop_reason = result.reason;
            if (config.early_stopping.enabled) {
                best[r] = monitor.best_weights();
                trace.best_iteration = monitor.best_iteration();
                trace.best_validation_error = monitor.best_error();
            } else {
                best[r] = result.w;
                trace.best_iteration = result.iterations;
                trace.best_validation_error = monitor.curve().back();
            }
            trace.final_train_error = result.value;
        } catch (const OptimizationError& e) {
            trace.failed = true;
            trace.stop_reason = StopReason::NonFinite;
            trace.diagnostic = e.what();
            trace.best_validation_error = std::numeric_limits<double>::infinity();
        }
        trace.validation_curve = monitor.curve();
    });

    FitReport report;
    report.architecture = arch;
    std::optional<std::size_t> winner;
    for (std::size_t r = 0; r < config.restarts; ++r) {
        if (traces[r].failed) continue;
        if (!winner || traces[r].best_validation_error < traces[*winner].best_validation_error) winner = r;
    }
    if (!winner) throw OptimizationError("every restart failed: " + traces.front().diagnostic);
    report.best_restart = *winner;
    report.best_validation_error = traces[*winner].best_validation_error;
    report.best_weights = WeightVector(arch, best[*winner]);
    report.restarts = std::move(traces);
    report.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace symmlp
