#pragma once

#include <Eigen/Dense>

namespace gsde {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}

inline Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

inline Mat mat22(double a11, double a12, double a21, double a22) {
  Mat m(2, 2);
  m << a11, a12, a21, a22;
  return m;
}

}  // namespace gsde
