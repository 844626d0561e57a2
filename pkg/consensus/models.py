from django.db import models


class SimulationRun(models.Model):
    schedule_digest = models.CharField(max_length=64, db_index=True)
    seed = models.BigIntegerField()
    n_nodes = models.IntegerField()
    config_text = models.TextField()
    report_text = models.TextField()
    agreement_passed = models.BooleanField()
    violation_count = models.IntegerField(default=0)
    # counterexample kept from a sweep
    archived = models.BooleanField(default=False)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        verdict = 'pass' if self.agreement_passed else 'fail'
        return f'n={self.n_nodes} seed={self.seed} {verdict} {self.schedule_digest[:12]}'

    @classmethod
    def record(cls, report, archived=False):
        return cls.objects.create(
            schedule_digest=report.schedule_digest,
            seed=report.config.rng_seed,
            n_nodes=report.config.n_nodes,
            config_text=report.config.to_text(),
            report_text=report.render(),
            agreement_passed=report.agreement.passed,
            violation_count=len(report.violations),
            archived=archived,
        )
