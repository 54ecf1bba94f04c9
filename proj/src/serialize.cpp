#include "gac/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gac/errors.hpp"

namespace gac {

NamedTensor NamedTensor::from_matrix(const std::string& name, const Eigen::MatrixXd& m) {
  NamedTensor t;
  t.name = name;
  t.shape = {static_cast<int>(m.rows()), static_cast<int>(m.cols())};
  t.values.resize(m.size());
  long k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t.values[k++] = m(i, j);
  return t;
}

NamedTensor NamedTensor::from_vector(const std::string& name, const Eigen::VectorXd& v) {
  NamedTensor t;
  t.name = name;
  t.shape = {static_cast<int>(v.size())};
  t.values = v;
  return t;
}

NamedTensor NamedTensor::from_scalar(const std::string& name, double v) {
  NamedTensor t;
  t.name = name;
  t.shape = {1};
  t.values.resize(1);
  t.values[0] = v;
  return t;
}

long NamedTensor::element_count() const {
  long n = 1;
  for (int d : shape) n *= d;
  return n;
}

Eigen::MatrixXd NamedTensor::as_matrix() const {
  if (shape.size() != 2) throw ShapeMismatch("tensor '" + name + "' is not 2-d");
  Eigen::MatrixXd m(shape[0], shape[1]);
  long k = 0;
  for (int i = 0; i < shape[0]; ++i)
    for (int j = 0; j < shape[1]; ++j) m(i, j) = values[k++];
  return m;
}

Eigen::VectorXd NamedTensor::as_vector() const {
  if (shape.size() != 1) throw ShapeMismatch("tensor '" + name + "' is not 1-d");
  return values;
}

void write_tensors(std::ostream& out, const std::vector<NamedTensor>& tensors) {
  out << "gac-tensors 1\n";
  char buf[64];
  for (const auto& t : tensors) {
    out << "tensor " << t.name << " " << t.shape.size();
    for (int d : t.shape) out << " " << d;
    out << "\n";
    for (Eigen::Index i = 0; i < t.values.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", t.values[i]);
      out << buf << '\n';
    }
  }
}

std::vector<NamedTensor> read_tensors(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "gac-tensors" || version != 1)
    throw ConfigError("not a gac tensor file");
  std::vector<NamedTensor> tensors;
  std::string tag;
  while (in >> tag) {
    if (tag != "tensor") throw ConfigError("malformed tensor file near '" + tag + "'");
    NamedTensor t;
    std::size_t ndim = 0;
    if (!(in >> t.name >> ndim)) throw ConfigError("malformed tensor header");
    t.shape.resize(ndim);
    for (std::size_t i = 0; i < ndim; ++i)
      if (!(in >> t.shape[i])) throw ConfigError("malformed tensor shape");
    const long n = t.element_count();
    t.values.resize(n);
    for (long i = 0; i < n; ++i)
      if (!(in >> t.values[i])) throw ConfigError("truncated tensor values");
    tensors.push_back(std::move(t));
  }
  return tensors;
}

void save_tensors(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  write_tensors(out, tensors);
}

std::vector<NamedTensor> load_tensors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return read_tensors(in);
}

const NamedTensor& find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw ConfigError("tensor '" + name + "' missing from file");
}

}  // namespace gac
