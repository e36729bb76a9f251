#ifndef CODESIGN_MATRIX_BUNDLE_HPP
#define CODESIGN_MATRIX_BUNDLE_HPP

#include <Eigen/Core>
#include <iosfwd>
#include <map>
#include <string>

namespace codesign {

// Named collection of dense matrices with a plain-text serialization.
//
// File layout:
//   codesign-bundle v1
//   <count>
//   then per matrix:
//   <name> <rows> <cols>
//   row-major values, one row per line, C99 hex-float formatted so a
//   save/load round trip is bit exact.
class MatrixBundle {
 public:
  void put(const std::string& name, const Eigen::MatrixXd& m) { items_[name] = m; }
  const Eigen::MatrixXd& get(const std::string& name) const;
  bool has(const std::string& name) const { return items_.count(name) != 0; }
  std::size_t size() const { return items_.size(); }

  void save(const std::string& path) const;
  static MatrixBundle load(const std::string& path);

  void write(std::ostream& os) const;
  static MatrixBundle read(std::istream& is);

 private:
  std::map<std::string, Eigen::MatrixXd> items_;
};

}  // namespace codesign

#endif
