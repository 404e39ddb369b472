#include "mht/fitting.hpp"

#include "mht/errors.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace mht {

void FitConfig::validate() const {
    if (!(r_min > 0.0 && r_min < r_max)) throw InvalidArgument("fit config requires 0 < r_min < r_max");
    if (!(gradient_tol > 0.0 && step_tol > 0.0)) throw InvalidArgument("fit tolerances must be positive");
    if (!(initial_damping > 0.0)) throw InvalidArgument("initial damping must be positive");
    if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
    if (!(weight_window_factor > 0.0)) throw InvalidArgument("weight window factor must be positive");
    if (!(gamma >= 2.0)) throw InvalidArgument("gamma must be >= 2");
}

Photometry solve_photometry(std::span<const double> tv, std::span<const double> iv, std::span<const double> wv) {
    const std::size_t n = tv.size();
    if (n < 3 || iv.size() != n || wv.size() != n) throw SingularDesign("photometry needs at least 3 samples");

    double sw = 0.0, st = 0.0, si = 0.0, stt = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double om = wv[i] * wv[i];
        sw += om;
        st += om * tv[i];
        si += om * iv[i];
        stt += om * tv[i] * tv[i];
    }
    if (!(sw > 0.0)) throw SingularDesign("all stencil weights are zero");
    const double tbar = st / sw;
    const double ibar = si / sw;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double om = wv[i] * wv[i];
        const double dt = tv[i] - tbar;
        sxx += om * dt * dt;
        sxy += om * dt * (iv[i] - ibar);
    }

    // Condition number of the normal matrix [[stt, st], [st, sw]].
    const double tr = stt + sw;
    const double det = sw * sxx;
    const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    const double lmax = 0.5 * tr + disc;
    const double lmin = det / lmax;
    if (!(sxx > 0.0) || !(lmin > 0.0) || lmax / lmin > 1e12)
        throw SingularDesign("template values do not vary enough over the stencil");

    Photometry p;
    p.contrast = sxy / sxx;
    p.background = ibar - p.contrast * tbar;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = p.contrast * tv[i] + p.background - iv[i];
        rss += wv[i] * wv[i] * e * e;
    }
    p.rss = rss;
    p.n = n;
    const double sigma2 = rss / static_cast<double>(n - 2);
    p.contrast_std = std::sqrt(sigma2 / sxx);
    return p;
}

Photometry solve_linear_photometry(const Volume3D& vol, const TubeTemplate& t, const SampleStencil& s) {
    std::vector<double> tv(s.size()), iv(s.size());
    evaluate_template(t, s.points, tv);
    for (std::size_t i = 0; i < s.size(); ++i) iv[i] = vol.sample(s.points[i]);
    return solve_photometry(tv, iv, s.weights);
}

double t_statistic(double k, double m, double k_std) {
    if (!(k_std > 0.0)) throw NonpositiveStd("t-statistic needs std(k) > 0");
    return (k - m) / k_std;
}

TubeTemplate apply_params(const TubeTemplate& base, const FitParams& delta) {
    Vec3 u, w;
    orthonormal_frame(base.direction, u, w);
    TubeTemplate t = base;
    t.radius = base.radius + delta[0];
    t.center = base.center + delta[1] * u + delta[2] * w;
    t.direction = (base.direction + delta[3] * u + delta[4] * w).normalized();
    return t;
}

ProjectedResidual::ProjectedResidual(const Volume3D& vol, const TubeTemplate& base, double window_factor)
    : base_(base), stencil_(build_stencil(base, window_factor, vol.spacing(), &vol)) {
    intensities_.resize(stencil_.size());
    for (std::size_t i = 0; i < stencil_.size(); ++i) intensities_[i] = vol.sample(stencil_.points[i]);
    scratch_.resize(stencil_.size());
}

Eigen::VectorXd ProjectedResidual::residuals(const FitParams& delta) const {
    const TubeTemplate t = apply_params(base_, delta);
    if (!(t.radius > 0.0)) throw SingularDesign("non-positive trial radius");
    evaluate_template(t, stencil_.points, scratch_);
    const Photometry p = solve_photometry(scratch_, intensities_, stencil_.weights);
    Eigen::VectorXd e(static_cast<Eigen::Index>(stencil_.size()));
    for (std::size_t i = 0; i < stencil_.size(); ++i)
        e[static_cast<Eigen::Index>(i)] =
            stencil_.weights[i] * (p.contrast * scratch_[i] + p.background - intensities_[i]);
    return e;
}

FitParams ProjectedResidual::scales() const {
    FitParams s;
    s << base_.radius, base_.radius, base_.radius, 1.0, 1.0;
    return s;
}

Eigen::Matrix<double, Eigen::Dynamic, 5> ProjectedResidual::jacobian(const FitParams& delta, double rel_step) const {
    const FitParams sc = scales();
    Eigen::Matrix<double, Eigen::Dynamic, 5> jac(static_cast<Eigen::Index>(stencil_.size()), 5);
    for (int j = 0; j < 5; ++j) {
        const double h = rel_step * sc[j];
        FitParams plus = delta, minus = delta;
        plus[j] += h;
        minus[j] -= h;
        jac.col(j) = (residuals(plus) - residuals(minus)) / (2.0 * h);
    }
    return jac;
}

namespace {

// Moves the center back onto the plane through `anchor` orthogonal to the direction.
void project_center(TubeTemplate& t, const WorldPoint& anchor) {
    t.center -= (t.center - anchor).dot(t.direction) * t.direction;
}

}  // namespace

FitResult fit_template(const Volume3D& vol, const TubeTemplate& init, const FitConfig& cfg, FitTrace* trace) {
    cfg.validate();
    if (!vol.contains(init.center)) throw FitFailed("initial template center outside the volume");

    TubeTemplate current = init;
    current.direction.normalize();
    current.gamma = cfg.gamma;
    current.radius = std::clamp(current.radius, cfg.r_min, cfg.r_max);
    const WorldPoint anchor = init.center;

    std::optional<ProjectedResidual> model;
    try {
        model.emplace(vol, current, cfg.weight_window_factor);
        (void)model->cost(FitParams::Zero());
    } catch (const DegenerateStencil& e) {
        throw FitFailed(std::string("fit failed: ") + e.what());
    } catch (const SingularDesign& e) {
        throw FitFailed(std::string("fit failed: ") + e.what());
    }

    double lambda = cfg.initial_damping;
    bool converged = false;
    int iterations = 0;
    Eigen::VectorXd e0;
    double cost0 = 0.0;
    Eigen::Matrix<double, Eigen::Dynamic, 5> jac;
    Eigen::Matrix<double, 5, 5> jtj;
    FitParams grad;

    auto linearize = [&] {
        e0 = model->residuals(FitParams::Zero());
        cost0 = e0.squaredNorm();
        jac = model->jacobian(FitParams::Zero());
        jtj = jac.transpose() * jac;
        grad = jac.transpose() * e0;
    };
    linearize();

    while (iterations < cfg.max_iterations) {
        ++iterations;

        // Scale-free gradient test: cosine between residual and each Jacobian column.
        const double enorm = std::sqrt(cost0);
        double gmax = 0.0;
        for (int j = 0; j < 5; ++j) {
            const double cn = jac.col(j).norm();
            if (cn > 0.0 && enorm > 0.0) gmax = std::max(gmax, std::abs(grad[j]) / (cn * enorm));
        }
        if (gmax <= cfg.gradient_tol || cost0 == 0.0) {
            converged = true;
            break;
        }

        Eigen::Matrix<double, 5, 5> a = jtj;
        for (int j = 0; j < 5; ++j) a(j, j) += lambda * std::max(jtj(j, j), 1e-300);
        const FitParams delta = a.ldlt().solve(-grad);

        double cost1 = std::numeric_limits<double>::infinity();
        TubeTemplate trial = apply_params(current, delta);
        trial.radius = std::clamp(trial.radius, cfg.r_min, cfg.r_max);
        FitParams clamped = delta;
        clamped[0] = trial.radius - current.radius;
        if (delta.allFinite()) {
            try {
                cost1 = model->cost(clamped);
            } catch (const SingularDesign&) {
            }
        }

        if (!(cost1 < cost0)) {
            lambda *= 10.0;
            if (lambda > 1e12) {
                // No descent direction left at machine precision.
                converged = true;
                break;
            }
            continue;
        }

        project_center(trial, anchor);
        const double step = (clamped.array() / model->scales().array()).abs().maxCoeff();
        if (!vol.contains(trial.center)) break;
        try {
            ProjectedResidual next(vol, trial, cfg.weight_window_factor);
            (void)next.cost(FitParams::Zero());
            model.emplace(std::move(next));
        } catch (const Error&) {
            break;  // the step leads somewhere unusable; keep the last state
        }
        if (trace != nullptr) trace->accepted_steps.emplace_back(cost0, cost1);
        current = trial;
        lambda = std::max(lambda * 0.1, 1e-12);
        linearize();
        if (step < cfg.step_tol) {
            converged = true;
            break;
        }
    }

    FitResult r;
    r.tmpl = current;
    r.tmpl.direction.normalize();
    r.iterations = iterations;
    r.converged = converged;
    r.radius_at_bound = current.radius <= cfg.r_min * (1.0 + 1e-9) || current.radius >= cfg.r_max * (1.0 - 1e-9);
    try {
        const SampleStencil s = build_stencil(r.tmpl, cfg.weight_window_factor, vol.spacing(), &vol);
        const Photometry p = solve_linear_photometry(vol, r.tmpl, s);
        r.contrast = p.contrast;
        r.background = p.background;
        r.contrast_std = p.contrast_std;
        r.rss = p.rss;
        r.n_samples = static_cast<int>(p.n);
    } catch (const DegenerateStencil& e) {
        throw FitFailed(std::string("fit failed: ") + e.what());
    } catch (const SingularDesign& e) {
        throw FitFailed(std::string("fit failed: ") + e.what());
    }
    if (r.contrast_std > 0.0) {
        r.t_stat = t_statistic(r.contrast, r.background, r.contrast_std);
    } else {
        const double diff = r.contrast - r.background;
        r.t_stat = diff > 0.0 ? std::numeric_limits<double>::infinity()
                              : (diff < 0.0 ? -std::numeric_limits<double>::infinity() : 0.0);
    }
    return r;
}

}  // namespace mht
