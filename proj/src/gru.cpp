#include "storyplot/nn/gru.hpp"

namespace storyplot::nn {

GruCell GruCell::create(ParamSet& ps, const std::string& prefix,
                        Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng) {
    GruCell c;
    c.input_dim = input_dim;
    c.hidden_dim = hidden_dim;
    c.wz = &ps.add(prefix + ".wz", input_dim, hidden_dim);
    c.uz = &ps.add(prefix + ".uz", hidden_dim, hidden_dim);
    c.bz = &ps.add(prefix + ".bz", 1, hidden_dim);
    c.wr = &ps.add(prefix + ".wr", input_dim, hidden_dim);
    c.ur = &ps.add(prefix + ".ur", hidden_dim, hidden_dim);
    c.br = &ps.add(prefix + ".br", 1, hidden_dim);
    c.wh = &ps.add(prefix + ".wh", input_dim, hidden_dim);
    c.uh = &ps.add(prefix + ".uh", hidden_dim, hidden_dim);
    c.bh = &ps.add(prefix + ".bh", 1, hidden_dim);
    for (Tensor* w : {c.wz, c.uz, c.wr, c.ur, c.wh, c.uh}) init_glorot(*w, rng);
    return c;
}

GruCell GruCell::attach(ParamSet& ps, const std::string& prefix,
                        Eigen::Index input_dim, Eigen::Index hidden_dim) {
    GruCell c;
    c.input_dim = input_dim;
    c.hidden_dim = hidden_dim;
    c.wz = ps.find(prefix + ".wz");
    c.uz = ps.find(prefix + ".uz");
    c.bz = ps.find(prefix + ".bz");
    c.wr = ps.find(prefix + ".wr");
    c.ur = ps.find(prefix + ".ur");
    c.wh = ps.find(prefix + ".wh");
    c.uh = ps.find(prefix + ".uh");
    c.bh = ps.find(prefix + ".bh");
    return c;
}

Var GruCell::step(Tape& t, Var x, Var h) const {
    Var z = t.sigmoid(t.add(t.add(t.matmul(x, t.leaf(*wz)), t.matmul(h, t.leaf(*uz))), t.leaf(*bz)));
    Var r = t.sigmoid(t.add(t.add(t.matmul(x, t.leaf(*wr)), t.matmul(h, t.leaf(*ur))), t.leaf(*br)));
    Var hc = t.tanh(t.add(t.add(t.matmul(x, t.leaf(*wh)), t.matmul(t.cmul(r, h), t.leaf(*uh))), t.leaf(*bh)));
    // h' = (1-z)*h + z*hc
    Var one_minus_z = t.affine(z, -1.0, 1.0);
    return t.add(t.cmul(one_minus_z, h), t.cmul(z, hc));
}

}  // namespace storyplot::nn
