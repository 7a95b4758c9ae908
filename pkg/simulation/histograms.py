from dataclasses import dataclass

import numpy as np
import pandas as pd


@dataclass(frozen=True)
class CoincidenceHistogram:
    """ Counts binned along the D2 scan axis for a run of `trials` pairs. """
    bin_centers: np.ndarray
    coincidences: np.ndarray
    singles_d1: np.ndarray
    singles_d2: np.ndarray
    trials: int

    def __post_init__(self):
        n = len(self.bin_centers)
        for name in ('coincidences', 'singles_d1', 'singles_d2'):
            counts = np.asarray(getattr(self, name), dtype=np.int64)
            if counts.shape != (n,):
                raise ValueError(f'{name} must have one count per bin ({n}), got shape {counts.shape}')
            if np.any(counts < 0):
                raise ValueError(f'{name} contains negative counts')
            counts.setflags(write=False)
            object.__setattr__(self, name, counts)
        if np.any(self.coincidences > np.minimum(self.singles_d1, self.singles_d2)):
            raise ValueError('coincidences exceed singles in some bin')
        # one pair per trial: D2 clicks land in one bin, D1 clicks are counted against every bin
        for name, total in (('coincidences', self.coincidences.sum()), ('singles_d2', self.singles_d2.sum()),
                            ('singles_d1', self.singles_d1.max(initial=0))):
            if total > self.trials:
                raise ValueError(f'{name} total {total} exceeds the {self.trials} trials')

    @classmethod
    def empty(cls, bin_centers: np.ndarray) -> 'CoincidenceHistogram':
        zeros = np.zeros(len(bin_centers), dtype=np.int64)
        return cls(bin_centers=np.asarray(bin_centers, dtype=float), coincidences=zeros, singles_d1=zeros,
                   singles_d2=zeros, trials=0)

    def merge(self, other: 'CoincidenceHistogram') -> 'CoincidenceHistogram':
        if not np.array_equal(self.bin_centers, other.bin_centers):
            raise ValueError('cannot merge histograms with different bins')
        return CoincidenceHistogram(bin_centers=self.bin_centers,
                                    coincidences=self.coincidences + other.coincidences,
                                    singles_d1=self.singles_d1 + other.singles_d1,
                                    singles_d2=self.singles_d2 + other.singles_d2,
                                    trials=self.trials + other.trials)

    @property
    def image(self) -> np.ndarray:
        """ Coincidences normalised to their maximum (zeros when empty). """
        peak = self.coincidences.max() if len(self.coincidences) else 0
        if peak == 0:
            return np.zeros(len(self.coincidences))
        return self.coincidences / peak

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'bin_center': self.bin_centers,
                             'coincidences': self.coincidences,
                             'singles_d1': self.singles_d1,
                             'singles_d2': self.singles_d2})
