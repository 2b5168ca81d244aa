#pragma once

#include <string_view>
#include <vector>

namespace finsler {

// Metric definitions bundled into the binary so `finsler2d example <name>`
// works without any files on disk.  configs/<name>.toml carries the same
// text; a unit test keeps the two in sync.

inline constexpr std::string_view kFunkToml = R"TOML(# Projectively flat metric on the unit disk, rescaled by the length of its
# own projective factor.  The rescaled spray coincides with the base spray.
name = "funk"

F   = "ay*zz/(1 + ax)^2"
phi = "zz"

[params]
a1 = 0.1
a2 = 0.2

[let]
ax = "a1*x1 + a2*x2"
ay = "a1*y1 + a2*y2"
z1 = "((1 + ax)*y1 - ay*x1)/ay"
z2 = "((1 + ax)*y2 - ay*x2)/ay"
zz = "sqrt(z1^2 + z2^2)"

[domain]
require = ["ay > 0", "1 + ax > 0", "1 - x1^2 - x2^2 > 0"]

[box]
x1 = [-0.25, 0.25]
x2 = [-0.25, 0.25]
y1 = [0.2, 1.2]
y2 = [0.2, 1.2]
)TOML";

inline constexpr std::string_view kBerwaldRundToml = R"TOML(# Indefinite-signature metric whose rescaled partner is Berwald but provably
# not the rescaling of any Riemannian metric.
name = "berwald-rund"

F   = "sqrt(2*y1*y2*x2^2 + c*y2^2)/x2"
phi = "1.5*ln(u/(x2^2*y2))"

[let]
c = "1 - 2*x1*x2 + sqrt(1 - 4*x1*x2)"
u = "2*x2^2*y1 + c*y2"

[domain]
require = ["1 - 4*x1*x2 > 0", "x2 > 0", "y2 > 0", "u > 0", "2*y1*y2*x2^2 + c*y2^2 > 0"]

[box]
x1 = [0.05, 0.25]
x2 = [0.2, 0.6]
y1 = [0.3, 1.2]
y2 = [0.3, 1.2]
)TOML";

struct BuiltinExample {
    std::string_view name;
    std::string_view toml;
};

inline const std::vector<BuiltinExample>& builtin_examples() {
    static const std::vector<BuiltinExample> v = {
        {"funk", kFunkToml},
        {"berwald-rund", kBerwaldRundToml},
    };
    return v;
}

} // namespace finsler
