"""Forward and inverse scattering for the cubic string i y''' = m(x) lam^3 y."""
