"""Simplified mmWave uplink channel.

The full array-beamforming / ray-traced channel is deliberately replaced by
a compact surrogate that keeps every effect the learners must pick up:

* log-distance path loss (separate LOS / NLOS exponents),
* obstacle blockage switching LOS to NLOS with an extra penalty,
* Rician (LOS) / Rayleigh (NLOS) small-scale fading whose scattered part
  evolves as an AR(1) process decorrelating with the link's Doppler spread,
* scalar mainlobe/sidelobe beam alignment gains,
* an interference power sum over concurrent transmitters plus thermal noise.

Rates then follow the Shannon formula W * log2(1 + SINR).
"""

from __future__ import annotations

import math

import numpy as np


def path_loss(dist, wavelength: float, ref_dist: float, exponent) -> np.ndarray:
    """Linear power gain (lambda/(4*pi*d0))^2 * (d/d0)^-n, d clamped at d0."""
    d = np.maximum(np.asarray(dist, dtype=float), ref_dist)
    base = (wavelength / (4.0 * math.pi * ref_dist)) ** 2
    return base * (d / ref_dist) ** (-np.asarray(exponent, dtype=float))


def ar1_coefficient(doppler, delta_t: float, scale: float) -> np.ndarray:
    """Fading autocorrelation across one period: exp(-scale * f_D * dt)."""
    return np.exp(-scale * np.asarray(doppler, dtype=float) * delta_t)


def evolve_scatter(state: np.ndarray, rho, innovation: np.ndarray) -> np.ndarray:
    """One AR(1) step of the complex scattered component (unit variance kept)."""
    rho = np.asarray(rho, dtype=float)
    return rho * state + np.sqrt(1.0 - rho * rho) * innovation


def draw_scatter(rng: np.random.Generator, shape) -> np.ndarray:
    """Complex normal draw with unit power: CN(0, 1)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def fading_power(scatter: np.ndarray, los: np.ndarray, rician_k: float) -> np.ndarray:
    """|g|^2 where g is Rician (LOS, factor K) or Rayleigh (NLOS).

    The scattered component is shared; the LOS branch adds the deterministic
    specular part so that E[|g|^2] = 1 on both branches.
    """
    los_amp = math.sqrt(rician_k / (1.0 + rician_k))
    scatter_amp = math.sqrt(1.0 / (1.0 + rician_k))
    g_los = los_amp + scatter_amp * scatter
    return np.where(los, np.abs(g_los) ** 2, np.abs(scatter) ** 2)


class RateEvaluator:
    """Counterfactual rate queries against one period's frozen channel state.

    base_gain[i, j] holds the policy-independent part of the link power gain
    (path loss x blockage penalty x fading) between vehicle row i and base
    station column j.  Beam alignment depends on the association: the serving
    link gets the full mainlobe gain; an interfering uplink aimed at the same
    BS is suppressed once (the serving receive beam does not point at it);
    an uplink aimed at another BS is suppressed twice (neither its transmit
    beam nor the receive beam is aligned).
    """

    def __init__(
        self,
        vehicle_ids: list[int],
        station_ids: list[int],
        base_gain: np.ndarray,
        *,
        tx_power: float,
        bandwidth: float,
        noise_power: float,
        mainlobe: float,
        sidelobe_rel: float,
        candidates: dict[int, list[int]],
    ):
        self.vehicle_ids = list(vehicle_ids)
        self.station_ids = list(station_ids)
        self._vrow = {vid: i for i, vid in enumerate(self.vehicle_ids)}
        self._bcol = {bs: j for j, bs in enumerate(self.station_ids)}
        self.base_gain = base_gain
        self.tx_power = tx_power
        self.bandwidth = bandwidth
        self.noise_power = noise_power
        self.mainlobe = mainlobe
        self.intra_gain = mainlobe * sidelobe_rel
        self.inter_gain = mainlobe * sidelobe_rel * sidelobe_rel
        self.candidates = candidates

    # -- helpers ------------------------------------------------------------

    def _contrib(self, assoc: dict[int, int]) -> np.ndarray:
        """Interference contribution matrix: transmitter row x BS column."""
        contrib = np.zeros_like(self.base_gain)
        for vid, bs in assoc.items():
            i = self._vrow[vid]
            row = self.tx_power * self.inter_gain * self.base_gain[i]
            j = self._bcol[bs]
            row[j] = self.tx_power * self.intra_gain * self.base_gain[i, j]
            contrib[i] = row
        return contrib

    def interference(self, vid: int, bs: int, assoc: dict[int, int]) -> float:
        """Interference-plus-noise power at `bs` while serving `vid`."""
        contrib = self._contrib(assoc)
        j = self._bcol[bs]
        total = float(contrib[:, j].sum() - contrib[self._vrow[vid], j])
        return total + self.noise_power

    def rate(self, vid: int, bs: int, assoc: dict[int, int]) -> float:
        """Shannon rate of `vid` on `bs`, other associations held fixed."""
        signal = self.tx_power * self.mainlobe * self.base_gain[self._vrow[vid], self._bcol[bs]]
        return self.bandwidth * math.log2(1.0 + signal / self.interference(vid, bs, assoc))

    def rates(self, assoc: dict[int, int]) -> dict[int, float]:
        """Realized rate of every associated vehicle under `assoc`."""
        contrib = self._contrib(assoc)
        totals = contrib.sum(axis=0)
        out = {}
        for vid, bs in assoc.items():
            i, j = self._vrow[vid], self._bcol[bs]
            interference = totals[j] - contrib[i, j] + self.noise_power
            signal = self.tx_power * self.mainlobe * self.base_gain[i, j]
            out[vid] = self.bandwidth * math.log2(1.0 + signal / interference)
        return out

    def total_rate(self, assoc: dict[int, int]) -> float:
        return sum(self.rates(assoc).values())

    def noise_only_rate(self, vid: int, bs: int) -> float:
        """Rate the vehicle would see with no interferers at all."""
        signal = self.tx_power * self.mainlobe * self.base_gain[self._vrow[vid], self._bcol[bs]]
        return self.bandwidth * math.log2(1.0 + signal / self.noise_power)

    def best_response(self, vid: int, assoc: dict[int, int]) -> tuple[int, float]:
        """Best candidate BS and its rate for `vid`, others held fixed."""
        contrib = self._contrib(assoc)
        totals = contrib.sum(axis=0)
        i = self._vrow[vid]
        best_bs, best_rate = None, -math.inf
        for bs in self.candidates[vid]:
            j = self._bcol[bs]
            interference = totals[j] - contrib[i, j] + self.noise_power
            signal = self.tx_power * self.mainlobe * self.base_gain[i, j]
            r = self.bandwidth * math.log2(1.0 + signal / interference)
            if r > best_rate:
                best_bs, best_rate = bs, r
        return best_bs, best_rate
