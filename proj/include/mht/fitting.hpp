#pragma once

#include "mht/tube_template.hpp"
#include "mht/volume.hpp"

#include <Eigen/Core>

#include <span>
#include <utility>
#include <vector>

namespace mht {

/// Levenberg-Marquardt settings for the template fit.
struct FitConfig {
    int max_iterations = 40;
    double gradient_tol = 1e-8;   ///< scaled gradient (cosine) tolerance
    double step_tol = 1e-6;       ///< scaled parameter step tolerance
    double initial_damping = 1e-3;
    double r_min = 1.0;           ///< mm
    double r_max = 10.0;          ///< mm
    double weight_window_factor = 1.0;
    double gamma = 8.0;

    /// Throws InvalidArgument when the invariants do not hold.
    void validate() const;
};

/// Weighted linear fit of I ~ k * T + m over a stencil.
struct Photometry {
    double contrast = 0.0;      ///< k
    double background = 0.0;    ///< m
    double contrast_std = 0.0;  ///< std(k)
    double rss = 0.0;           ///< weighted residual sum of squares
    std::size_t n = 0;
};

struct FitResult {
    TubeTemplate tmpl;
    double contrast = 0.0;
    double background = 0.0;
    double contrast_std = 0.0;
    double t_stat = 0.0;  ///< (k - m) / std(k)
    double rss = 0.0;
    int n_samples = 0;
    bool converged = false;
    int iterations = 0;
    bool radius_at_bound = false;  ///< fit pinned at r_min or r_max
};

/// Per accepted LM step: weighted RSS before and after, on the same stencil.
struct FitTrace {
    std::vector<std::pair<double, double>> accepted_steps;
};

/// Core solver on pre-sampled values; `weights` are the diagonal of W, so the
/// effective least-squares weights are weights^2. Throws SingularDesign when the
/// 2x2 normal matrix has condition number above 1e12.
Photometry solve_photometry(std::span<const double> template_values, std::span<const double> intensities,
                            std::span<const double> weights);

/// Samples the volume at the stencil points and solves for (k, m, std(k), rss).
Photometry solve_linear_photometry(const Volume3D& vol, const TubeTemplate& t, const SampleStencil& s);

/// (k - m) / std(k). Throws NonpositiveStd when k_std <= 0.
double t_statistic(double k, double m, double k_std);

/// Local geometry parameterization used by the fit: the template is perturbed
/// by delta = (dr, du, dw, du_angle, dw_angle) in the frame (u, w) orthogonal
/// to the current direction.
using FitParams = Eigen::Matrix<double, 5, 1>;

TubeTemplate apply_params(const TubeTemplate& base, const FitParams& delta);

/// Variable-projection residual for a frozen stencil: for each geometry the
/// photometry is re-solved linearly and the weighted residual vector returned.
class ProjectedResidual {
public:
    /// Builds the stencil around `base` and samples the volume once.
    /// Throws DegenerateStencil when the stencil is too small.
    ProjectedResidual(const Volume3D& vol, const TubeTemplate& base, double window_factor);

    const TubeTemplate& base() const { return base_; }
    const SampleStencil& stencil() const { return stencil_; }
    std::span<const double> intensities() const { return intensities_; }

    /// Weighted residual vector w_i * (k T_i + m - I_i). Throws SingularDesign.
    Eigen::VectorXd residuals(const FitParams& delta) const;
    double cost(const FitParams& delta) const { return residuals(delta).squaredNorm(); }

    /// Per-parameter scale: the radius for the three length parameters, 1 rad for angles.
    FitParams scales() const;

    /// Central finite-difference Jacobian of residuals() at `delta`, with step
    /// rel_step * scale per parameter.
    Eigen::Matrix<double, Eigen::Dynamic, 5> jacobian(const FitParams& delta, double rel_step = 1e-4) const;

private:
    TubeTemplate base_;
    SampleStencil stencil_;
    std::vector<double> intensities_;
    mutable std::vector<double> scratch_;
};

/// Fits (r, center, direction) of a tube template to the volume starting from
/// `init`. The center moves only within the plane through init.center
/// orthogonal to the direction. Non-converged fits are returned with
/// converged = false. Throws FitFailed when no valid stencil or photometry can
/// be formed at the initial geometry.
FitResult fit_template(const Volume3D& vol, const TubeTemplate& init, const FitConfig& cfg,
                       FitTrace* trace = nullptr);

}  // namespace mht
