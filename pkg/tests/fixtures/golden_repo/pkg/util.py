def helper(x):
    """Shared helper."""
    return x


class Tool:
    def run(self, job):
        """Run one job."""
        self.prepare(job)
        helper(job)

    def prepare(self, job):
        return job
