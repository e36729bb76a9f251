#include "codesign/matrix_bundle.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "codesign/errors.hpp"

namespace codesign {

const Eigen::MatrixXd& MatrixBundle::get(const std::string& name) const {
  auto it = items_.find(name);
  if (it == items_.end()) throw ParseError("matrix bundle: no entry named '" + name + "'");
  return it->second;
}

void MatrixBundle::write(std::ostream& os) const {
  os << "codesign-bundle v1\n" << items_.size() << "\n";
  char buf[64];
  for (const auto& [name, m] : items_) {
    os << name << " " << m.rows() << " " << m.cols() << "\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        std::snprintf(buf, sizeof(buf), "%a", m(r, c));
        os << (c ? " " : "") << buf;
      }
      os << "\n";
    }
  }
}

MatrixBundle MatrixBundle::read(std::istream& is) {
  std::string magic, version;
  is >> magic >> version;
  if (magic != "codesign-bundle" || version != "v1")
    throw ParseError("matrix bundle: bad header '" + magic + " " + version + "'");
  std::size_t count = 0;
  is >> count;
  MatrixBundle b;
  for (std::size_t i = 0; i < count; ++i) {
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    if (!(is >> name >> rows >> cols))
      throw ParseError("matrix bundle: truncated entry header");
    if (rows < 0 || cols < 0) throw ParseError("matrix bundle: negative dims for '" + name + "'");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        std::string tok;
        if (!(is >> tok)) throw ParseError("matrix bundle: truncated values for '" + name + "'");
        char* end = nullptr;
        m(r, c) = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str()) throw ParseError("matrix bundle: bad number '" + tok + "' in '" + name + "'");
      }
    b.items_[name] = std::move(m);
  }
  return b;
}

void MatrixBundle::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw ParseError("matrix bundle: cannot open '" + path + "' for writing");
  write(os);
}

MatrixBundle MatrixBundle::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("matrix bundle: cannot open '" + path + "'");
  return read(is);
}

}  // namespace codesign
