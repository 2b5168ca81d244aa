#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "finsler/expr.hpp"

namespace finsler {

// One conic-domain inequality.  `positive` terms require expr > 0 at every
// sample point; the others require expr != 0.
struct DomainTerm {
    ExprPtr expr;
    bool positive = true;
    std::string src;
};

// A metric definition file:
//
//   name = "funk"                      # optional
//   F    = "ay*zz/(1 + ax)^2"          # required; positively 1-homogeneous in y
//   phi  = "zz"                        # optional; 0-homogeneous in y
//
//   [params]                           # optional numeric constants
//   a1 = 0.1
//
//   [let]                              # optional ordered helper bindings;
//   ax = "a1*x1 + a2*x2"               # later entries may use earlier ones
//
//   [domain]                           # optional conic-domain inequalities
//   require = ["ay > 0", "1 - x1^2 - x2^2 > 0"]
//
//   [box]                              # optional default sampling box
//   x1 = [-0.4, 0.4]
//   ...
//
// '#' starts a comment.  Values are double-quoted strings, numbers, or
// (for require/box) bracketed arrays that may span lines.
struct MetricDef {
    std::string name;
    std::string F_src;
    std::string phi_src;  // empty when no conformal factor is defined
    ExprPtr F;
    ExprPtr phi;          // null when absent
    std::vector<std::pair<std::string, double>> params;
    std::vector<std::pair<std::string, ExprPtr>> lets;  // in file order
    std::vector<DomainTerm> domain;
    std::optional<std::array<std::array<double, 2>, 4>> box;

    // F / phi / domain lowered against params and lets; all three share one
    // set of lowered let sub-DAGs, so per-point evaluation caches them once.
    struct Lowered {
        Field F;
        Field phi;                                  // null when absent
        std::vector<std::pair<Field, bool>> domain; // (field, positive?)
    };
    Lowered lower() const;
};

// Parse a definition from text / load it from disk.  Errors are reported as
// SyntaxError with the byte offset of the offending line.
MetricDef parse_metric_def(std::string_view text);
MetricDef load_metric_file(const std::string& path);

} // namespace finsler
