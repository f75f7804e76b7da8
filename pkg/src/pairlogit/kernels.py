"""Numerical kernels shared by both backends.

Everything here is written with explicit loops and scalar math so that the
exact same source compiles under numba nopython mode and also executes as
plain Python over numpy scalars. No BLAS calls, no allocation in hot loops
beyond small per-chain scratch buffers.

Random numbers come from an in-kernel splitmix64 generator. Both backends
walk the identical stream for a given seed, which is what makes sampler
output reproducible independent of thread count.

Integer codes used across kernels:
    prior kind: 0 = naive, 1 = g, 2 = pmp, 3 = hybrid
    target mode: 0 = conditional-likelihood posterior, 1 = Gaussian (testing)
    chain status: 0 = ok, 1 = drift restart budget exhausted
"""

import math

import numpy as np

from ._backend import jit_kernel

U64_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
U64_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
U64_MIX2 = np.uint64(0x94D049BB133111EB)
INV_2_53 = 1.0 / 9007199254740992.0
TWO_PI = 6.283185307179586
LOG_2PI = 1.8378770664093453
LOG2 = 0.6931471805599453

DIVERGENCE_ENERGY = 1000.0
DRIFT_LIMIT = 50.0

KIND_NAIVE = 0
KIND_G = 1
KIND_PMP = 2
KIND_HYBRID = 3

MODE_POSTERIOR = 0
MODE_GAUSSIAN = 1


# ---------------------------------------------------------------------------
# random stream

@jit_kernel
def sm64_next(state):
    # splitmix64: state is a length-1 uint64 array, mutated in place
    s = state[0] + U64_GOLDEN
    state[0] = s
    z = (s ^ (s >> np.uint64(30))) * U64_MIX1
    z = (z ^ (z >> np.uint64(27))) * U64_MIX2
    return z ^ (z >> np.uint64(31))


@jit_kernel
def rng_u01(state):
    # uniform on [0, 1) with 53-bit resolution
    return float(sm64_next(state) >> np.uint64(11)) * INV_2_53


@jit_kernel
def rng_randn(state):
    # Box-Muller, cosine branch; u1 in [0,1) keeps the log argument in (0,1]
    u1 = rng_u01(state)
    u2 = rng_u01(state)
    r = np.sqrt(-2.0 * np.log1p(-u1))
    return r * np.cos(TWO_PI * u2)


@jit_kernel
def rng_gamma(state, shape):
    # Marsaglia-Tsang squeeze, rate 1; shapes below 1 use the boost identity
    boost = 1.0
    a = shape
    if a < 1.0:
        u = rng_u01(state)
        if u < 1e-12:
            u = 1e-12
        boost = u ** (1.0 / a)
        a = a + 1.0
    d = a - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    while True:
        x = rng_randn(state)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = rng_u01(state)
        if u < 1.0 - 0.0331 * x * x * x * x:
            return boost * d * v
        if u < 1e-320:
            u = 1e-320
        if np.log(u) < 0.5 * x * x + d * (1.0 - v + np.log(v)):
            return boost * d * v


# ---------------------------------------------------------------------------
# scalar logistic helpers

@jit_kernel
def sigmoid(u):
    if u >= 0.0:
        return 1.0 / (1.0 + np.exp(-u))
    e = np.exp(u)
    return e / (1.0 + e)


@jit_kernel
def log_sigmoid(u):
    if u > 0.0:
        return -np.log1p(np.exp(-u))
    return u - np.log1p(np.exp(u))


# ---------------------------------------------------------------------------
# conditional likelihood on discordant differences
#
# eta_i = beta_w + dx_i . beta, z_i = 1 when the treated member is the case.

@jit_kernel
def clr_loglik(beta_w, beta, dx, z):
    m = dx.shape[0]
    p = dx.shape[1]
    total = 0.0
    for i in range(m):
        eta = beta_w
        for j in range(p):
            eta += dx[i, j] * beta[j]
        if z[i] > 0.5:
            total += log_sigmoid(eta)
        else:
            total += log_sigmoid(-eta)
    return total


@jit_kernel
def clr_loglik_grad(beta_w, beta, dx, z, grad):
    # adds the gradient (beta_w coordinate first) into grad, returns loglik
    m = dx.shape[0]
    p = dx.shape[1]
    total = 0.0
    for i in range(m):
        eta = beta_w
        for j in range(p):
            eta += dx[i, j] * beta[j]
        if z[i] > 0.5:
            total += log_sigmoid(eta)
        else:
            total += log_sigmoid(-eta)
        resid = z[i] - sigmoid(eta)
        grad[0] += resid
        for j in range(p):
            grad[1 + j] += resid * dx[i, j]
    return total


@jit_kernel
def clr_neg_hessian(beta_w, beta, dx, z, out):
    # out gets sum_i q(1-q) a a^T with a = (1, dx_i); z unused but kept for symmetry
    m = dx.shape[0]
    p = dx.shape[1]
    d = p + 1
    for r in range(d):
        for c in range(d):
            out[r, c] = 0.0
    for i in range(m):
        eta = beta_w
        for j in range(p):
            eta += dx[i, j] * beta[j]
        q = sigmoid(eta)
        w = q * (1.0 - q)
        out[0, 0] += w
        for j in range(p):
            out[0, 1 + j] += w * dx[i, j]
            out[1 + j, 0] += w * dx[i, j]
            for k in range(p):
                out[1 + j, 1 + k] += w * dx[i, j] * dx[i, k]
    return 0.0


@jit_kernel
def fisher_info_ww(beta_w, beta, dx, w_tilde):
    # observed information for the treatment coordinate after residualizing
    # the constant treatment regressor off the difference columns
    m = dx.shape[0]
    p = dx.shape[1]
    total = 0.0
    for i in range(m):
        eta = beta_w
        for j in range(p):
            eta += dx[i, j] * beta[j]
        q = sigmoid(eta)
        total += w_tilde[i] * w_tilde[i] * q * (1.0 - q)
    return total


# ---------------------------------------------------------------------------
# prior density over theta = (beta_w, beta) at fixed g

@jit_kernel
def quadform(prec, v):
    p = v.shape[0]
    total = 0.0
    for i in range(p):
        row = 0.0
        for j in range(p):
            row += prec[i, j] * v[j]
        total += v[i] * row
    return total


@jit_kernel
def prior_logp_grad(theta, g, kind, b_c, prec_c, logdet_sigma_c, tau2,
                    n_disc, dx, w_tilde, grad):
    # adds the theta-gradient into grad, returns the log prior value at
    # (theta, g) including normalization in g so Gibbs moves stay comparable
    p = b_c.shape[0]
    beta_w = theta[0]

    gauss_scale = 1.0
    if kind == KIND_G or kind == KIND_HYBRID:
        gauss_scale = g

    # Gaussian block on beta around the concordant estimate
    q = 0.0
    for i in range(p):
        row = 0.0
        for j in range(p):
            row += prec_c[i, j] * (theta[1 + j] - b_c[j])
        q += (theta[1 + i] - b_c[i]) * row
        grad[1 + i] += -row / gauss_scale
    val = -0.5 * (q / gauss_scale + logdet_sigma_c + p * LOG_2PI
                  + p * np.log(gauss_scale))

    # treatment coordinate: N(0, tau2) except under the flat pmp margin
    if kind != KIND_PMP:
        val += -0.5 * (beta_w * beta_w / tau2 + np.log(TWO_PI * tau2))
        grad[0] += -beta_w / tau2

    # inverse-gamma factor on g itself
    if kind == KIND_G or kind == KIND_HYBRID:
        scale = 0.5 * n_disc
        if scale > 0.0:
            val += 0.5 * np.log(scale)
        val += -math.lgamma(0.5) - 1.5 * np.log(g) - scale / g

    # information factor: half log of I_ww at theta
    if kind == KIND_PMP or kind == KIND_HYBRID:
        info = fisher_info_ww(beta_w, theta[1:], dx, w_tilde)
        if info <= 0.0:
            return -np.inf
        val += 0.5 * np.log(info)
        # gradient via d eta/d beta_w = 1, d eta/d beta_j = dx_ij
        m = dx.shape[0]
        for i in range(m):
            eta = beta_w
            for j in range(p):
                eta += dx[i, j] * theta[1 + j]
            qi = sigmoid(eta)
            dinfo = w_tilde[i] * w_tilde[i] * (1.0 - 2.0 * qi) * qi * (1.0 - qi)
            coef = dinfo / (2.0 * info)
            grad[0] += coef
            for j in range(p):
                grad[1 + j] += coef * dx[i, j]
    return val


@jit_kernel
def posterior_logp_grad(theta, g, kind, mode, dx, z, b_c, prec_c,
                        logdet_sigma_c, tau2, n_disc, w_tilde,
                        targ_mean, targ_prec, grad):
    # overwrites grad; returns the unnormalized log target at fixed g
    d = theta.shape[0]
    for k in range(d):
        grad[k] = 0.0
    if mode == MODE_GAUSSIAN:
        val = 0.0
        for i in range(d):
            row = 0.0
            for j in range(d):
                row += targ_prec[i, j] * (theta[j] - targ_mean[j])
            val += -0.5 * (theta[i] - targ_mean[i]) * row
            grad[i] = -row
        return val
    val = clr_loglik_grad(theta[0], theta[1:], dx, z, grad)
    val += prior_logp_grad(theta, g, kind, b_c, prec_c, logdet_sigma_c,
                           tau2, n_disc, dx, w_tilde, grad)
    return val


# ---------------------------------------------------------------------------
# one Hamiltonian chain

@jit_kernel
def _chain_probe(theta, g, kind, mode, dx, z, b_c, prec_c, logdet_sigma_c,
                 tau2, n_disc, w_tilde, targ_mean, targ_prec,
                 inv_mass, r, eps, th_s, grad_s):
    # single leapfrog step from theta with momentum r; returns the resulting
    # log joint (target minus kinetic). Scratch arrays are overwritten.
    d = theta.shape[0]
    lp0 = posterior_logp_grad(theta, g, kind, mode, dx, z, b_c, prec_c,
                              logdet_sigma_c, tau2, n_disc, w_tilde,
                              targ_mean, targ_prec, grad_s)
    kin = 0.0
    for k in range(d):
        th_s[k] = theta[k]
        kin += 0.5 * r[k] * r[k] * inv_mass[k]
    start = lp0 - kin
    rk = np.empty(d)
    for k in range(d):
        rk[k] = r[k] + 0.5 * eps * grad_s[k]
    for k in range(d):
        th_s[k] += eps * inv_mass[k] * rk[k]
    lp1 = posterior_logp_grad(th_s, g, kind, mode, dx, z, b_c, prec_c,
                              logdet_sigma_c, tau2, n_disc, w_tilde,
                              targ_mean, targ_prec, grad_s)
    if not np.isfinite(lp1):
        return start, -np.inf
    kin = 0.0
    for k in range(d):
        rk[k] += 0.5 * eps * grad_s[k]
        kin += 0.5 * rk[k] * rk[k] * inv_mass[k]
    return start, lp1 - kin


@jit_kernel
def hmc_chain(dx, z, w_tilde, b_c, prec_c, logdet_sigma_c, tau2, n_disc,
              kind, mode, targ_mean, targ_prec,
              warmup, draws, target_accept, max_leapfrog, init_jitter,
              seed, max_restarts,
              out_theta, out_g, out_stats):
    """Run one chain; fill out_theta (draws, dim), out_g (draws,) and
    out_stats = (summed accept prob, post-warmup divergences, status)."""
    d = out_theta.shape[1]
    state = np.empty(1, np.uint64)
    state[0] = seed
    has_g = mode == MODE_POSTERIOR and (kind == KIND_G or kind == KIND_HYBRID)
    check_drift = mode == MODE_POSTERIOR and kind == KIND_PMP
    p = b_c.shape[0]

    th = np.empty(d)
    grad = np.empty(d)
    th_prop = np.empty(d)
    grad_prop = np.empty(d)
    r = np.empty(d)
    th_s = np.empty(d)
    grad_s = np.empty(d)
    inv_mass = np.ones(d)
    wf_mean = np.zeros(d)
    wf_m2 = np.zeros(d)

    g = 1.0
    lp = 0.0
    eps = 1.0
    log_eps = 0.0
    log_eps_bar = 0.0
    h_bar = 0.0
    mu = 0.0
    restarts = 0

    # ----- warmup with restart loop -----
    while True:
        for k in range(d):
            th[k] = init_jitter * rng_randn(state)
            inv_mass[k] = 1.0
            wf_mean[k] = 0.0
            wf_m2[k] = 0.0
        wf_n = 0
        g = 1.0
        lp = posterior_logp_grad(th, g, kind, mode, dx, z, b_c, prec_c,
                                 logdet_sigma_c, tau2, n_disc, w_tilde,
                                 targ_mean, targ_prec, grad)

        # heuristic search for a workable initial step size
        eps = 1.0
        if np.isfinite(lp):
            for k in range(d):
                r[k] = rng_randn(state) / np.sqrt(inv_mass[k])
            start, end = _chain_probe(th, g, kind, mode, dx, z, b_c, prec_c,
                                      logdet_sigma_c, tau2, n_disc, w_tilde,
                                      targ_mean, targ_prec, inv_mass, r, eps,
                                      th_s, grad_s)
            tries = 0
            while not np.isfinite(end) and tries < 60:
                eps *= 0.5
                start, end = _chain_probe(th, g, kind, mode, dx, z, b_c,
                                          prec_c, logdet_sigma_c, tau2,
                                          n_disc, w_tilde, targ_mean,
                                          targ_prec, inv_mass, r, eps,
                                          th_s, grad_s)
                tries += 1
            if np.isfinite(end):
                dh = end - start
                direction = 1.0 if dh > -LOG2 else -1.0
                for _ in range(60):
                    if direction > 0.0 and not dh > -LOG2:
                        break
                    if direction < 0.0 and not dh < LOG2:
                        break
                    eps_new = eps * (2.0 ** direction)
                    if eps_new < 1e-10 or eps_new > 1e6:
                        break
                    s2, e2 = _chain_probe(th, g, kind, mode, dx, z, b_c,
                                          prec_c, logdet_sigma_c, tau2,
                                          n_disc, w_tilde, targ_mean,
                                          targ_prec, inv_mass, r, eps_new,
                                          th_s, grad_s)
                    if not np.isfinite(e2):
                        break
                    eps = eps_new
                    dh = e2 - s2

        mu = np.log(10.0 * eps)
        log_eps = np.log(eps)
        log_eps_bar = 0.0
        h_bar = 0.0
        drift_failed = False

        for it in range(warmup):
            # --- one transition ---
            kin = 0.0
            for k in range(d):
                r[k] = rng_randn(state) / np.sqrt(inv_mass[k])
                kin += 0.5 * r[k] * r[k] * inv_mass[k]
            joint0 = lp - kin
            l_max = int(1.5 / eps + 0.5)
            if l_max < 1:
                l_max = 1
            if l_max > max_leapfrog:
                l_max = max_leapfrog
            steps = 1 + int(rng_u01(state) * l_max)
            for k in range(d):
                th_prop[k] = th[k]
                grad_prop[k] = grad[k]
            lp_prop = lp
            bad = False
            for k in range(d):
                r[k] += 0.5 * eps * grad_prop[k]
            for s in range(steps):
                for k in range(d):
                    th_prop[k] += eps * inv_mass[k] * r[k]
                lp_prop = posterior_logp_grad(th_prop, g, kind, mode, dx, z,
                                              b_c, prec_c, logdet_sigma_c,
                                              tau2, n_disc, w_tilde,
                                              targ_mean, targ_prec, grad_prop)
                if not np.isfinite(lp_prop):
                    bad = True
                    break
                if s < steps - 1:
                    for k in range(d):
                        r[k] += eps * grad_prop[k]
            alpha = 0.0
            if not bad:
                kin = 0.0
                for k in range(d):
                    r[k] += 0.5 * eps * grad_prop[k]
                    kin += 0.5 * r[k] * r[k] * inv_mass[k]
                dh = (lp_prop - kin) - joint0
                if dh < -DIVERGENCE_ENERGY or not np.isfinite(dh):
                    alpha = 0.0
                elif dh >= 0.0:
                    alpha = 1.0
                else:
                    alpha = np.exp(dh)
                if rng_u01(state) < alpha:
                    for k in range(d):
                        th[k] = th_prop[k]
                        grad[k] = grad_prop[k]
                    lp = lp_prop

            # dual averaging toward the target acceptance rate
            mstep = it + 1
            frac = 1.0 / (mstep + 10.0)
            h_bar = (1.0 - frac) * h_bar + frac * (target_accept - alpha)
            log_eps = mu - np.sqrt(mstep) / 0.05 * h_bar
            if log_eps > 10.0:
                log_eps = 10.0
            if log_eps < -20.0:
                log_eps = -20.0
            w = mstep ** (-0.75)
            log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar
            eps = np.exp(log_eps)

            # conjugate update of g given beta
            if has_g:
                qf = 0.0
                for i in range(p):
                    row = 0.0
                    for j in range(p):
                        row += prec_c[i, j] * (th[1 + j] - b_c[j])
                    qf += (th[1 + i] - b_c[i]) * row
                x = rng_gamma(state, 0.5 + 0.5 * p)
                g = 0.5 * (n_disc + qf) / x
                lp = posterior_logp_grad(th, g, kind, mode, dx, z, b_c,
                                         prec_c, logdet_sigma_c, tau2,
                                         n_disc, w_tilde, targ_mean,
                                         targ_prec, grad)

            if check_drift and np.abs(th[0]) > DRIFT_LIMIT:
                drift_failed = True
                break

            # second half of warmup estimates the diagonal metric
            if it >= warmup // 2:
                wf_n += 1
                for k in range(d):
                    delta = th[k] - wf_mean[k]
                    wf_mean[k] += delta / wf_n
                    wf_m2[k] += delta * (th[k] - wf_mean[k])
                if (wf_n % 100 == 0 or it == warmup - 1) and wf_n >= 20:
                    for k in range(d):
                        var = wf_m2[k] / (wf_n - 1)
                        reg = (var * wf_n / (wf_n + 5.0)
                               + 1e-3 * 5.0 / (wf_n + 5.0))
                        inv_mass[k] = reg

        if drift_failed:
            restarts += 1
            if restarts > max_restarts:
                out_stats[0] = 0.0
                out_stats[1] = float(draws)
                out_stats[2] = 1.0
                return
            continue
        break

    if warmup > 0:
        eps = np.exp(log_eps_bar)
        if eps < 1e-10:
            eps = 1e-10

    # ----- sampling -----
    accept_sum = 0.0
    n_div = 0
    for it in range(draws):
        kin = 0.0
        for k in range(d):
            r[k] = rng_randn(state) / np.sqrt(inv_mass[k])
            kin += 0.5 * r[k] * r[k] * inv_mass[k]
        joint0 = lp - kin
        l_max = int(1.5 / eps + 0.5)
        if l_max < 1:
            l_max = 1
        if l_max > max_leapfrog:
            l_max = max_leapfrog
        steps = 1 + int(rng_u01(state) * l_max)
        for k in range(d):
            th_prop[k] = th[k]
            grad_prop[k] = grad[k]
        lp_prop = lp
        bad = False
        for k in range(d):
            r[k] += 0.5 * eps * grad_prop[k]
        for s in range(steps):
            for k in range(d):
                th_prop[k] += eps * inv_mass[k] * r[k]
            lp_prop = posterior_logp_grad(th_prop, g, kind, mode, dx, z,
                                          b_c, prec_c, logdet_sigma_c,
                                          tau2, n_disc, w_tilde,
                                          targ_mean, targ_prec, grad_prop)
            if not np.isfinite(lp_prop):
                bad = True
                break
            if s < steps - 1:
                for k in range(d):
                    r[k] += eps * grad_prop[k]
        alpha = 0.0
        divergent = False
        if bad:
            divergent = True
        else:
            kin = 0.0
            for k in range(d):
                r[k] += 0.5 * eps * grad_prop[k]
                kin += 0.5 * r[k] * r[k] * inv_mass[k]
            dh = (lp_prop - kin) - joint0
            if not np.isfinite(dh) or dh < -DIVERGENCE_ENERGY:
                divergent = True
            elif dh >= 0.0:
                alpha = 1.0
            else:
                alpha = np.exp(dh)
            if not divergent and rng_u01(state) < alpha:
                for k in range(d):
                    th[k] = th_prop[k]
                    grad[k] = grad_prop[k]
                lp = lp_prop
        accept_sum += alpha
        if divergent:
            n_div += 1

        if has_g:
            qf = 0.0
            for i in range(p):
                row = 0.0
                for j in range(p):
                    row += prec_c[i, j] * (th[1 + j] - b_c[j])
                qf += (th[1 + i] - b_c[i]) * row
            x = rng_gamma(state, 0.5 + 0.5 * p)
            g = 0.5 * (n_disc + qf) / x
            lp = posterior_logp_grad(th, g, kind, mode, dx, z, b_c, prec_c,
                                     logdet_sigma_c, tau2, n_disc, w_tilde,
                                     targ_mean, targ_prec, grad)

        for k in range(d):
            out_theta[it, k] = th[k]
        out_g[it] = g

    out_stats[0] = accept_sum
    out_stats[1] = float(n_div)
    out_stats[2] = 0.0
