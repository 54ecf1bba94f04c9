#ifndef GAC_VERIFY_HPP
#define GAC_VERIFY_HPP

#include <string>
#include <vector>

namespace gac {

// Oracle-backed spot checks exposed through the CLI `verify` subcommand.
struct VerifyReport {
  std::string suite;
  bool passed = true;
  std::vector<std::string> lines;
};

std::vector<std::string> verify_suite_names();
VerifyReport run_verify_suite(const std::string& name);

}  // namespace gac

#endif
