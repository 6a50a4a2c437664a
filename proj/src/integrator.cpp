#include "finn/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace finn::integrator {

void IntegratorConfig::validate() const {
    if (atol <= 0.0 || rtol <= 0.0)
        throw std::invalid_argument("integrator: tolerances must be positive");
    if (times.empty())
        throw std::invalid_argument("integrator: output grid is empty");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw std::invalid_argument("integrator: output grid must be strictly increasing");
    if (fixed_steps_per_interval < 1)
        throw std::invalid_argument("integrator: fixed_steps_per_interval < 1");
    if (max_steps_per_interval < 1)
        throw std::invalid_argument("integrator: max_steps_per_interval < 1");
}

namespace {

constexpr int kMaxStages = 7;

struct Tableau {
    int stages = 1;
    double a[kMaxStages][kMaxStages] = {};
    double c[kMaxStages] = {};
    double b[kMaxStages] = {};
    double d[kMaxStages] = {};  // b - b_hat (embedded error weights)
    bool adaptive = false;
    bool fsal = false;
};

const Tableau& euler_tableau() {
    static const Tableau t = [] {
        Tableau t;
        t.stages = 1;
        t.b[0] = 1.0;
        return t;
    }();
    return t;
}

const Tableau& rk4_tableau() {
    static const Tableau t = [] {
        Tableau t;
        t.stages = 4;
        t.a[1][0] = 0.5;
        t.a[2][1] = 0.5;
        t.a[3][2] = 1.0;
        t.c[1] = 0.5;
        t.c[2] = 0.5;
        t.c[3] = 1.0;
        t.b[0] = 1.0 / 6.0;
        t.b[1] = 1.0 / 3.0;
        t.b[2] = 1.0 / 3.0;
        t.b[3] = 1.0 / 6.0;
        return t;
    }();
    return t;
}

const Tableau& dp45_tableau() {
    static const Tableau t = [] {
        Tableau t;
        t.stages = 7;
        t.adaptive = true;
        t.fsal = true;
        t.c[1] = 1.0 / 5.0;
        t.c[2] = 3.0 / 10.0;
        t.c[3] = 4.0 / 5.0;
        t.c[4] = 8.0 / 9.0;
        t.c[5] = 1.0;
        t.c[6] = 1.0;
        t.a[1][0] = 1.0 / 5.0;
        t.a[2][0] = 3.0 / 40.0;
        t.a[2][1] = 9.0 / 40.0;
        t.a[3][0] = 44.0 / 45.0;
        t.a[3][1] = -56.0 / 15.0;
        t.a[3][2] = 32.0 / 9.0;
        t.a[4][0] = 19372.0 / 6561.0;
        t.a[4][1] = -25360.0 / 2187.0;
        t.a[4][2] = 64448.0 / 6561.0;
        t.a[4][3] = -212.0 / 729.0;
        t.a[5][0] = 9017.0 / 3168.0;
        t.a[5][1] = -355.0 / 33.0;
        t.a[5][2] = 46732.0 / 5247.0;
        t.a[5][3] = 49.0 / 176.0;
        t.a[5][4] = -5103.0 / 18656.0;
        t.a[6][0] = 35.0 / 384.0;
        t.a[6][2] = 500.0 / 1113.0;
        t.a[6][3] = 125.0 / 192.0;
        t.a[6][4] = -2187.0 / 6784.0;
        t.a[6][5] = 11.0 / 84.0;
        t.b[0] = 35.0 / 384.0;
        t.b[2] = 500.0 / 1113.0;
        t.b[3] = 125.0 / 192.0;
        t.b[4] = -2187.0 / 6784.0;
        t.b[5] = 11.0 / 84.0;
        const double bh[7] = {5179.0 / 57600.0, 0.0,           7571.0 / 16695.0,
                              393.0 / 640.0,    -92097.0 / 339200.0,
                              187.0 / 2100.0,   1.0 / 40.0};
        for (int s = 0; s < 7; ++s) t.d[s] = t.b[s] - bh[s];
        return t;
    }();
    return t;
}

const Tableau& tableau_for(Scheme s) {
    switch (s) {
        case Scheme::Euler: return euler_tableau();
        case Scheme::RK4: return rk4_tableau();
        case Scheme::DormandPrince45: return dp45_tableau();
    }
    throw std::logic_error("integrator: unknown scheme");
}

struct PlainAlg {
    using State = std::vector<double>;
    const PlainRhs* rhs;

    State eval(double t, const State& u) {
        State d(u.size());
        (*rhs)(t, u, d);
        return d;
    }
    State axpy(const State& y, const State& k, double c) {
        State r(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            double p = c * k[i];
            r[i] = y[i] + p;
        }
        return r;
    }
    std::span<const double> values(const State& s) const { return s; }
    std::size_t mark() const { return 0; }
    void rewind(std::size_t) {}
};

struct TapeAlg {
    using State = ad::Var;
    const RecordedRhs* rhs;
    ad::Tape* tape;

    State eval(double t, State u) { return (*rhs)(*tape, t, u); }
    State axpy(State y, State k, double c) {
        return tape->add(y, tape->scale(k, c));
    }
    std::span<const double> values(State s) const { return tape->value(s); }
    std::size_t mark() const { return tape->mark(); }
    void rewind(std::size_t m) { tape->rewind(m); }
};

/// Weighted RMS of the embedded error estimate; NaN stages yield NaN.
double error_norm(const Tableau& tb, double h,
                  const std::vector<std::span<const double>>& k,
                  std::span<const double> y, std::span<const double> ynext,
                  double atol, double rtol) {
    double acc = 0.0;
    std::size_t n = y.size();
    for (std::size_t i = 0; i < n; ++i) {
        double e = 0.0;
        for (int s = 0; s < tb.stages; ++s) {
            if (tb.d[s] == 0.0) continue;
            e += (h * tb.d[s]) * k[static_cast<std::size_t>(s)][i];
        }
        double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(ynext[i]));
        double r = e / sc;
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(n));
}

template <class Alg, class Traj>
void run(Alg alg, typename Alg::State y, const IntegratorConfig& cfg, Traj& out) {
    cfg.validate();
    const Tableau& tb = tableau_for(cfg.scheme);
    out.states.push_back(y);

    typename Alg::State k1{};
    bool have_k1 = false;
    double h = 0.0;
    double err_prev = 1.0;
    constexpr double kSafety = 0.9;
    constexpr double kShrink = 0.2;
    constexpr double kGrow = 5.0;

    auto abort_with = [&](AbortInfo::Reason r, double t, std::string msg) {
        out.complete = false;
        out.abort.reason = r;
        out.abort.time = t;
        out.abort.message = std::move(msg);
    };

    for (std::size_t j = 0; j + 1 < cfg.times.size(); ++j) {
        double t = cfg.times[j];
        double tend = cfg.times[j + 1];
        double interval = tend - t;

        if (!tb.adaptive) {
            int nsub = cfg.fixed_steps_per_interval;
            double hs = interval / nsub;
            for (int step = 0; step < nsub; ++step) {
                std::vector<typename Alg::State> k(tb.stages);
                for (int s = 0; s < tb.stages; ++s) {
                    typename Alg::State ys = y;
                    for (int q = 0; q < s; ++q)
                        if (tb.a[s][q] != 0.0) ys = alg.axpy(ys, k[q], hs * tb.a[s][q]);
                    k[s] = alg.eval(t + tb.c[s] * hs, ys);
                }
                typename Alg::State ynext = y;
                for (int s = 0; s < tb.stages; ++s)
                    if (tb.b[s] != 0.0) ynext = alg.axpy(ynext, k[s], hs * tb.b[s]);
                t = cfg.times[j] + (step + 1) * hs;
                if (!ad::all_finite(alg.values(ynext))) {
                    abort_with(AbortInfo::Reason::NonFinite, t,
                               "non-finite state during fixed step");
                    return;
                }
                y = ynext;
                ++out.steps_accepted;
            }
            out.states.push_back(y);
            continue;
        }

        if (h <= 0.0)
            h = cfg.initial_step > 0.0 ? cfg.initial_step : interval / 10.0;
        h = std::min(h, interval);
        int steps_here = 0;
        const double t_eps = 1e-12 * std::max(1.0, std::abs(tend));

        while (t < tend - t_eps) {
            if (++steps_here > cfg.max_steps_per_interval) {
                abort_with(AbortInfo::Reason::MaxSteps, t,
                           "step budget exhausted; likely stiff");
                return;
            }
            double hcur = std::min(h, tend - t);
            if (hcur < 1e-14 * std::max(1.0, std::abs(t))) {
                abort_with(AbortInfo::Reason::StepUnderflow, t,
                           "step size underflow");
                return;
            }
            std::size_t m = alg.mark();
            std::vector<typename Alg::State> k(tb.stages);
            if (have_k1)
                k[0] = k1;
            else
                k[0] = alg.eval(t, y);
            for (int s = 1; s < tb.stages - 1; ++s) {
                typename Alg::State ys = y;
                for (int q = 0; q < s; ++q)
                    if (tb.a[s][q] != 0.0) ys = alg.axpy(ys, k[q], hcur * tb.a[s][q]);
                k[s] = alg.eval(t + tb.c[s] * hcur, ys);
            }
            // last row of `a` equals b: the final stage state is the solution
            typename Alg::State ynext = y;
            int last = tb.stages - 1;
            for (int q = 0; q < last; ++q)
                if (tb.a[last][q] != 0.0)
                    ynext = alg.axpy(ynext, k[q], hcur * tb.a[last][q]);
            k[last] = alg.eval(t + hcur, ynext);

            std::vector<std::span<const double>> kv;
            kv.reserve(tb.stages);
            for (int s = 0; s < tb.stages; ++s) kv.push_back(alg.values(k[s]));
            double err = error_norm(tb, hcur, kv, alg.values(y),
                                    alg.values(ynext), cfg.atol, cfg.rtol);

            bool finite = std::isfinite(err) && ad::all_finite(alg.values(ynext));
            if (finite && err <= 1.0) {
                y = ynext;
                k1 = k[static_cast<std::size_t>(last)];
                have_k1 = true;
                t += hcur;
                ++out.steps_accepted;
                double e = std::max(err, 1e-10);
                double fac = kSafety * std::pow(e, -0.7 / 5.0) *
                             std::pow(err_prev, 0.4 / 5.0);
                err_prev = e;
                h = hcur * std::clamp(fac, kShrink, kGrow);
            } else {
                alg.rewind(m);
                if (have_k1 && !tb.fsal) have_k1 = false;
                ++out.steps_rejected;
                if (!finite) {
                    h = hcur * kShrink;
                } else {
                    double fac = kSafety * std::pow(err, -1.0 / 5.0);
                    h = hcur * std::clamp(fac, kShrink, 1.0);
                }
            }
        }
        out.states.push_back(y);
    }
}

}  // namespace

Trajectory integrate(const PlainRhs& rhs, std::span<const double> u0,
                     const IntegratorConfig& cfg) {
    if (!ad::all_finite(u0))
        throw std::invalid_argument("integrator: non-finite initial state");
    Trajectory out;
    PlainAlg alg{&rhs};
    run(alg, std::vector<double>(u0.begin(), u0.end()), cfg, out);
    return out;
}

RecordedTrajectory integrate_recorded(const RecordedRhs& rhs, ad::Tape& tape,
                                      ad::Var u0, const IntegratorConfig& cfg) {
    if (!tape.finite(u0))
        throw std::invalid_argument("integrator: non-finite initial state");
    RecordedTrajectory out;
    TapeAlg alg{&rhs, &tape};
    run(alg, u0, cfg, out);
    return out;
}

}  // namespace finn::integrator
