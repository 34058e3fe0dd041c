#!/usr/bin/env python3

import os
import unittest

import minamilab as ml
from minamilab import mlg


class SystemTests(unittest.TestCase):
    # Call init_minamilab again and see if everything is reset properly
    def test_reinit(self):
        previous = (mlg.max_workers, mlg.debug_checks)
        try:
            ml.init_minamilab(max_workers=3, debug_checks=True)
            self.assertEqual(mlg.max_workers, 3)
            self.assertTrue(mlg.debug_checks)
            ml.init_minamilab()
            self.assertEqual(mlg.max_workers, 1)
            self.assertFalse(mlg.debug_checks)
        finally:
            ml.init_minamilab(*previous)

    def test_bad_worker_count(self):
        previous = mlg.max_workers
        try:
            ml.set_max_workers(0)
            self.assertEqual(mlg.max_workers, 1)
        finally:
            ml.set_max_workers(previous)

    def test_version(self):
        path = os.path.join(os.path.dirname(ml.__file__), "version.txt")
        with open(path) as f:
            self.assertEqual(ml.__version__, f.read().strip())


if __name__ == '__main__':
    unittest.main()
