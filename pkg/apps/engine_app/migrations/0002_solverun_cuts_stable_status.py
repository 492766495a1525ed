# Generated by Django 5.2.7 on 2026-10-18 14:03

from django.db import migrations, models


class Migration(migrations.Migration):

    dependencies = [
        ('engine_app', '0001_initial'),
    ]

    operations = [
        migrations.AlterField(
            model_name='solverun',
            name='status',
            field=models.CharField(choices=[('pending', 'Pending'), ('running', 'Running'), ('converged', 'Converged'), ('cuts_stable', 'Stalled without new cuts'), ('max_iters', 'Iteration limit'), ('structural_infeasibility', 'Structural infeasibility'), ('failed', 'Failed')], default='pending', max_length=32),
        ),
    ]
