#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace wgbf {

/// Highest polynomial degree any shipped rule is guaranteed to integrate.
inline constexpr int kMaxQuadDegree = 20;

/// Quadrature rule on the reference triangle (vertices (0,0), (1,0), (0,1)).
/// Points are stored as barycentric triples; weights sum to the reference
/// area 1/2. All weights are positive.
struct TriQuadrature {
  Eigen::Matrix<double, Eigen::Dynamic, 3> bary;
  Eigen::VectorXd weights;
  int exact_degree = 0;

  int size() const { return static_cast<int>(weights.size()); }
};

/// Quadrature rule on the reference interval [0,1]; weights sum to 1.
struct EdgeQuadrature {
  Eigen::VectorXd points;
  Eigen::VectorXd weights;
  int exact_degree = 0;

  int size() const { return static_cast<int>(weights.size()); }
};

namespace detail {

/// Gauss nodes/weights from the symmetric tridiagonal Jacobi matrix
/// (Golub-Welsch). `diag`/`sub` are the recurrence coefficients, `mu0`
/// the integral of the weight function.
inline void golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& sub,
                         double mu0, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  const int n = static_cast<int>(diag.size());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    jac(i, i) = diag[i];
    if (i + 1 < n) {
      jac(i, i + 1) = sub[i];
      jac(i + 1, i) = sub[i];
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  nodes = es.eigenvalues();
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    weights[i] = mu0 * v0 * v0;
  }
}

/// Gauss-Legendre rule on [0,1], exact for degree 2n-1.
inline void gauss_legendre_01(int n, Eigen::VectorXd& x, Eigen::VectorXd& w) {
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n > 1 ? n - 1 : 0);
  for (int k = 1; k < n; ++k) sub[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  Eigen::VectorXd t, wt;
  golub_welsch(diag, sub, 2.0, t, wt);
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    x[i] = 0.5 * (t[i] + 1.0);
    w[i] = 0.5 * wt[i];
  }
}

/// Gauss-Jacobi rule with weight (1-x) on [0,1], exact for degree 2n-1.
/// Used by the conical-product triangle rule.
inline void gauss_jacobi10_01(int n, Eigen::VectorXd& x, Eigen::VectorXd& w) {
  const double alpha = 1.0, beta = 0.0;
  Eigen::VectorXd diag(n), sub(n > 1 ? n - 1 : 0);
  diag[0] = (beta - alpha) / (alpha + beta + 2.0);
  for (int k = 1; k < n; ++k) {
    const double q = 2.0 * k + alpha + beta;
    diag[k] = (beta * beta - alpha * alpha) / (q * (q + 2.0));
  }
  for (int k = 1; k < n; ++k) {
    const double q = 2.0 * k + alpha + beta;
    sub[k - 1] = std::sqrt(4.0 * k * (k + alpha) * (k + beta) * (k + alpha + beta) /
                           (q * q * (q + 1.0) * (q - 1.0)));
  }
  Eigen::VectorXd t, wt;
  golub_welsch(diag, sub, 2.0, t, wt);  // mu0 = int_{-1}^{1} (1-t) dt = 2
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    x[i] = 0.5 * (t[i] + 1.0);
    w[i] = 0.25 * wt[i];  // (1-x) dx picks up 1/4 under the affine map
  }
}

struct TriRuleBuilder {
  std::vector<Eigen::Vector3d> pts;
  std::vector<double> wts;

  void centroid(double w) {
    pts.emplace_back(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
    wts.push_back(w);
  }
  // orbit of barycentric (a, a, 1-2a)
  void orbit3(double a, double w) {
    const double c = 1.0 - 2.0 * a;
    pts.emplace_back(a, a, c);
    pts.emplace_back(a, c, a);
    pts.emplace_back(c, a, a);
    wts.insert(wts.end(), 3, w);
  }
  // orbit of barycentric (a, b, 1-a-b), all six permutations
  void orbit6(double a, double b, double w) {
    const double c = 1.0 - a - b;
    pts.emplace_back(a, b, c);
    pts.emplace_back(a, c, b);
    pts.emplace_back(b, a, c);
    pts.emplace_back(b, c, a);
    pts.emplace_back(c, a, b);
    pts.emplace_back(c, b, a);
    wts.insert(wts.end(), 6, w);
  }
  TriQuadrature finish(int degree) const {
    TriQuadrature q;
    const int n = static_cast<int>(pts.size());
    q.bary.resize(n, 3);
    q.weights.resize(n);
    for (int i = 0; i < n; ++i) {
      q.bary.row(i) = pts[i].transpose();
      q.weights[i] = wts[i];
    }
    q.exact_degree = degree;
    return q;
  }
};

/// Symmetrized conical-product rule, exact for `degree`, positive weights.
/// Fallback for the degrees whose tabulated symmetric rule has negative
/// weights or exterior points.
inline TriQuadrature conical_triangle_rule(int degree) {
  const int n = (degree + 2) / 2;  // ceil((degree+1)/2)
  Eigen::VectorXd xj, wj, xl, wl;
  gauss_jacobi10_01(n, xj, wj);
  gauss_legendre_01(n, xl, wl);
  TriRuleBuilder b;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double x = xj[i];
      const double y = (1.0 - xj[i]) * xl[j];
      const double w = wj[i] * wl[j];
      // average over the six vertex permutations to restore symmetry
      const double l0 = 1.0 - x - y, l1 = x, l2 = y;
      b.pts.emplace_back(l0, l1, l2);
      b.pts.emplace_back(l0, l2, l1);
      b.pts.emplace_back(l1, l0, l2);
      b.pts.emplace_back(l1, l2, l0);
      b.pts.emplace_back(l2, l0, l1);
      b.pts.emplace_back(l2, l1, l0);
      b.wts.insert(b.wts.end(), 6, w / 6.0);
    }
  }
  return b.finish(degree);
}

// Symmetric positive-weight interior-point rules (Dunavant 1985). Degrees
// 3, 7 and 11 of that family carry negative weights or exterior points and
// are served by the next rule up; 15+ fall through to the conical product.
inline TriQuadrature table_triangle_rule(int degree) {
  TriRuleBuilder b;
  switch (degree) {
    case 1:
      b.centroid(0.5);
      return b.finish(1);
    case 2:
      b.orbit3(1.0 / 6.0, 1.0 / 6.0);
      return b.finish(2);
    case 4:
      b.orbit3(0.44594849091596488631832925388305, 0.22338158967801146569500700843312 / 2);
      b.orbit3(0.09157621350977074345957146340220, 0.10995174365532186763832632490021 / 2);
      return b.finish(4);
    case 5:
      b.centroid(0.225 / 2);
      b.orbit3(0.47014206410511508977044120951345, 0.13239415278850618073764938783315 / 2);
      b.orbit3(0.10128650732345633880098736191512, 0.12593918054482715259568394550018 / 2);
      return b.finish(5);
    case 6:
      b.orbit3(0.24928674517091042129163855310702, 0.11678627572637936602528961138558 / 2);
      b.orbit3(0.06308901449150222834033160287082, 0.05084490637020681692093680910686 / 2);
      b.orbit6(0.31035245103378440541660773395655, 0.63650249912139864723014259441205,
               0.08285107561837357519355345642044 / 2);
      return b.finish(6);
    case 8:
      b.centroid(0.14431560767778716825109111048906 / 2);
      b.orbit3(0.17056930775176020662229350149146, 0.10321737053471825028179155029212 / 2);
      b.orbit3(0.05054722831703097545842355059660, 0.03245849762319808031092592834178 / 2);
      b.orbit3(0.45929258829272315602881551449417, 0.09509163426728462479389610438858 / 2);
      b.orbit6(0.26311282963463811342178578628464, 0.72849239295540428124100037917606,
               0.02723031417443499426484469007390 / 2);
      return b.finish(8);
    case 9:
      b.centroid(0.09713579628279609890744676309485 / 2);
      b.orbit3(0.48968251919873762778370692483619, 0.03133470022713983234393199080984 / 2);
      b.orbit3(0.43708959149293663726993036443535, 0.07782754100477543338465495857972 / 2);
      b.orbit3(0.18820353561903273024096128046733, 0.07964773892720910288013526957424 / 2);
      b.orbit3(0.04472951339445297061024247196780, 0.02557767565869810438673914467637 / 2);
      b.orbit6(0.22196298916076569567510252769319, 0.74119859878449802069007987352342,
               0.04328353937728937728937728937729 / 2);
      return b.finish(9);
    case 10:
      b.centroid(0.090817990382754 / 2);
      b.orbit3(0.485577633383657, 0.036725957756467 / 2);
      b.orbit3(0.109481575485037, 0.045321059435528 / 2);
      b.orbit6(0.141707219414880, 0.307939838764121, 0.072757916845420 / 2);
      b.orbit6(0.025003534762686, 0.246672560639903, 0.028327242531057 / 2);
      b.orbit6(0.009540815400299, 0.066803251012200, 0.009421666963733 / 2);
      return b.finish(10);
    case 12:
      b.orbit3(0.488217389773805, 0.025731066440455 / 2);
      b.orbit3(0.439724392294460, 0.043692544538038 / 2);
      b.orbit3(0.271210385012116, 0.062858224217885 / 2);
      b.orbit3(0.127576145541586, 0.034796112930709 / 2);
      b.orbit3(0.021317350453210, 0.006166261051559 / 2);
      b.orbit6(0.115343494534698, 0.275713269685514, 0.040371557766381 / 2);
      b.orbit6(0.022838332222257, 0.281325580989940, 0.022356773202303 / 2);
      b.orbit6(0.025734050548330, 0.116251915907597, 0.017316231108659 / 2);
      return b.finish(12);
    case 13:
      b.centroid(0.052520923400802 / 2);
      b.orbit3(0.495048184939705, 0.011280145209330 / 2);
      b.orbit3(0.468716635109574, 0.031423518362454 / 2);
      b.orbit3(0.414521336801277, 0.047072502504194 / 2);
      b.orbit3(0.229399572042831, 0.047363586536355 / 2);
      b.orbit3(0.114424495196330, 0.031167529045794 / 2);
      b.orbit3(0.024811391363459, 0.007975771465074 / 2);
      b.orbit6(0.094853828379579, 0.268794997058761, 0.036848402728732 / 2);
      b.orbit6(0.018100773278807, 0.291730066734288, 0.017401463303822 / 2);
      b.orbit6(0.022233076674090, 0.126357385491669, 0.015521786839045 / 2);
      return b.finish(13);
    case 14:
      b.orbit3(0.488963910362179, 0.021883581369429 / 2);
      b.orbit3(0.417644719340454, 0.032788353544125 / 2);
      b.orbit3(0.273477528308839, 0.051774104507292 / 2);
      b.orbit3(0.177205532412543, 0.042162588736993 / 2);
      b.orbit3(0.061799883090873, 0.014433699669777 / 2);
      b.orbit3(0.019390961248701, 0.004923403602400 / 2);
      b.orbit6(0.057124757403648, 0.172266687821356, 0.024665753212564 / 2);
      b.orbit6(0.092916249356972, 0.336861459796345, 0.038571510787061 / 2);
      b.orbit6(0.014646950055654, 0.298372882136258, 0.014436308113534 / 2);
      b.orbit6(0.001268330932872, 0.118974497696957, 0.005010228838501 / 2);
      return b.finish(14);
    default:
      throw std::logic_error("no table rule for this degree");
  }
}

}  // namespace detail

/// Rule on the reference triangle exact for polynomials of total degree
/// at least `exact_degree`. Requests landing on a degree without a
/// positive tabulated rule are served by the next rule up.
inline TriQuadrature triangle_quadrature(int exact_degree) {
  if (exact_degree < 1 || exact_degree > kMaxQuadDegree)
    throw std::out_of_range("triangle_quadrature: degree must be in [1, 20], got " +
                            std::to_string(exact_degree));
  int d = exact_degree;
  if (d == 3) d = 4;
  if (d == 7) d = 8;
  if (d == 11) d = 12;
  if (d <= 14) return detail::table_triangle_rule(d);
  return detail::conical_triangle_rule(d);
}

/// Gauss-Legendre rule on [0,1] exact for the requested degree.
inline EdgeQuadrature edge_quadrature(int exact_degree) {
  if (exact_degree < 1 || exact_degree > 2 * kMaxQuadDegree)
    throw std::out_of_range("edge_quadrature: degree must be in [1, 40], got " +
                            std::to_string(exact_degree));
  const int n = (exact_degree + 2) / 2;
  EdgeQuadrature q;
  detail::gauss_legendre_01(n, q.points, q.weights);
  q.exact_degree = 2 * n - 1;
  return q;
}

}  // namespace wgbf
