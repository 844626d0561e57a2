# Generated by Django 4.2.17 on 2026-10-16 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="SimulationRun",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("schedule_digest", models.CharField(db_index=True, max_length=64)),
                ("seed", models.BigIntegerField()),
                ("n_nodes", models.IntegerField()),
                ("config_text", models.TextField()),
                ("report_text", models.TextField()),
                ("agreement_passed", models.BooleanField()),
                ("violation_count", models.IntegerField(default=0)),
                ("archived", models.BooleanField(default=False)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
            ],
            options={
                "ordering": ["-created_at"],
            },
        ),
    ]
