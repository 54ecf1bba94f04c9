#ifndef GAC_SERIALIZE_HPP
#define GAC_SERIALIZE_HPP

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

namespace gac {

// Textual tensor container: per tensor its name, shape, and row-major values
// printed with 17 significant digits so 64-bit floats round-trip bit-exactly.
struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  Eigen::VectorXd values;  // row-major flattening

  static NamedTensor from_matrix(const std::string& name, const Eigen::MatrixXd& m);
  static NamedTensor from_vector(const std::string& name, const Eigen::VectorXd& v);
  static NamedTensor from_scalar(const std::string& name, double v);
  Eigen::MatrixXd as_matrix() const;
  Eigen::VectorXd as_vector() const;
  long element_count() const;
};

void write_tensors(std::ostream& out, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensors(std::istream& in);

void save_tensors(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_tensors(const std::string& path);

const NamedTensor& find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name);

}  // namespace gac

#endif
