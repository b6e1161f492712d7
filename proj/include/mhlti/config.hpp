#pragma once

// JSON design configuration (comments allowed). Sections:
//
//   system      A, B, C, mu_w, sigma_w, sigma_e, mu_0, sigma_0
//   controllers K_low, K_high
//   agent       gamma_a, and cost_gap or R, r
//   principal   gamma_p, and optionally J0P + J1P or Q, q
//   utility     family (sqrt | power | exponential), rho
//   search      T_max, eta_grid_size, liability_mode, tol_sep, tol_cdf
//
// Matrices are row-major nested lists; a bare number stands for a 1x1
// matrix or a length-1 vector. Keys starting with '_' are ignored.

#include "mhlti/contract_designer.hpp"

#include <filesystem>
#include <string>

namespace mhlti {

/// Throws ConfigParse (with line:column) or ConfigInvalid (naming the field).
DesignConfig parse_config(const std::string& text, const std::string& origin = "<config>");

/// Reads and parses a file; throws Io when it cannot be read.
DesignConfig load_config(const std::filesystem::path& path);

/// Serializes a config so that parse_config(write_config(c)) equals c.
std::string write_config(const DesignConfig& config);

/// Field-by-field equality.
bool same_config(const DesignConfig& a, const DesignConfig& b);

}  // namespace mhlti
