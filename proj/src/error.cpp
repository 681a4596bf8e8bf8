#include "sitespec/error.hpp"

#include <utility>

namespace sitespec {

namespace {

std::string describe(const std::string& variable, const std::vector<std::string>& chain,
                     const std::string& selector, const std::string& stage) {
    std::string msg = "conflict on variable '" + variable + "'";
    if (!selector.empty()) msg += " in selector '" + selector + "'";
    if (!stage.empty()) msg += " (stage '" + stage + "')";
    if (!chain.empty()) {
        msg += ": ";
        for (std::size_t i = 0; i < chain.size(); ++i) {
            if (i) msg += " -> ";
            msg += chain[i];
        }
    }
    return msg;
}

}  // namespace

ConflictError::ConflictError(std::string variable, std::vector<std::string> chain,
                             std::string selector, std::string stage)
    : Error(describe(variable, chain, selector, stage)),
      variable_(std::move(variable)),
      chain_(std::move(chain)),
      selector_(std::move(selector)),
      stage_(std::move(stage)) {}

ConflictError ConflictError::with_stage(std::string stage) const {
    return ConflictError(variable_, chain_, selector_, std::move(stage));
}

}  // namespace sitespec
