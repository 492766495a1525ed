# Generated by Django 5.2.7 on 2026-10-18 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='SolveRun',
            fields=[
                ('id', models.AutoField(primary_key=True, serialize=False)),
                ('name', models.CharField(blank=True, default='', max_length=255)),
                ('instance_document', models.JSONField()),
                ('mode', models.CharField(choices=[('penalty_free', 'Penalty-free'), ('classic', 'Classic penalized')], default='penalty_free', max_length=20)),
                ('overrides', models.JSONField(blank=True, default=dict)),
                ('status', models.CharField(choices=[('pending', 'Pending'), ('running', 'Running'), ('converged', 'Converged'), ('max_iters', 'Iteration limit'), ('structural_infeasibility', 'Structural infeasibility'), ('failed', 'Failed')], default='pending', max_length=32)),
                ('report', models.JSONField(blank=True, null=True)),
                ('policy', models.JSONField(blank=True, null=True)),
                ('last_error', models.TextField(blank=True, null=True)),
                ('celery_task_id', models.CharField(blank=True, max_length=255, null=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('started_at', models.DateTimeField(blank=True, null=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
