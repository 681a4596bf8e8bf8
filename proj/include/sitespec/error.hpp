#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sitespec {

// Base for every failure raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input files (crawl dumps, program files, manifests, rule files).
class FormatError : public Error {
public:
    using Error::Error;
};

class IngestError : public Error {
public:
    using Error::Error;
};

class MiningError : public Error {
public:
    using Error::Error;
};

class CompositeError : public Error {
public:
    using Error::Error;
};

// A variable was driven to both True and False. `chain` lists the firing
// steps that led there, oldest first; `stage` is set when the conflict
// happened inside a composite cascade.
class ConflictError : public Error {
public:
    ConflictError(std::string variable, std::vector<std::string> chain,
                  std::string selector = {}, std::string stage = {});

    const std::string& variable() const noexcept { return variable_; }
    const std::vector<std::string>& chain() const noexcept { return chain_; }
    const std::string& selector() const noexcept { return selector_; }
    const std::string& stage() const noexcept { return stage_; }

    ConflictError with_stage(std::string stage) const;

private:
    std::string variable_;
    std::vector<std::string> chain_;
    std::string selector_;
    std::string stage_;
};

}  // namespace sitespec
