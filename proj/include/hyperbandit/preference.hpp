// Per-period bilinear preference map Θ_p (d_a × d_u), with rows split into the
// observed block Θ^s (first o_a rows) and the latent block Θ^x (last l_a rows).
#pragma once

#include <cstddef>
#include <span>

#include "hyperbandit/numerics.hpp"

namespace hyperbandit {

struct PreferenceShape {
    std::size_t observed_dim = 0;  ///< o_a
    std::size_t latent_dim = 0;    ///< l_a
    std::size_t user_dim = 0;      ///< d_u
    std::size_t rank = 0;          ///< τ; 0 selects full-rank output

    std::size_t item_dim() const noexcept { return observed_dim + latent_dim; }
    /// τ(d_a + d_u) in low-rank mode, d_a·d_u otherwise.
    std::size_t output_width() const noexcept {
        return rank > 0 ? rank * (item_dim() + user_dim) : item_dim() * user_dim;
    }

    friend bool operator==(const PreferenceShape&, const PreferenceShape&) = default;
};

class PreferenceMatrix {
public:
    PreferenceMatrix() = default;
    /// Throws DimMismatch if observed_dim exceeds theta's row count.
    PreferenceMatrix(Matrix theta, std::size_t observed_dim);

    const Matrix& theta() const noexcept { return theta_; }
    std::size_t observed_dim() const noexcept { return observed_dim_; }
    std::size_t latent_dim() const noexcept { return theta_.rows() - observed_dim_; }
    std::size_t item_dim() const noexcept { return theta_.rows(); }
    std::size_t user_dim() const noexcept { return theta_.cols(); }

    Matrix theta_s() const { return theta_.row_block(0, observed_dim_); }
    Matrix theta_x() const { return theta_.row_block(observed_dim_, latent_dim()); }

    /// Θ c_u, length d_a. Its first o_a entries are Q = Θ^s c_u, the rest P = Θ^x c_u.
    Vector project_user(std::span<const double> user) const { return matvec(theta_, user); }

private:
    Matrix theta_;
    std::size_t observed_dim_ = 0;
};

}  // namespace hyperbandit
